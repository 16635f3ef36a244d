#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

#include "crossimpact/types.hpp"

namespace crossimpact {

/// Liquidity primitives for one execution period (or for the whole day):
/// a diagonal of single-stock supply slopes (shares per dollar of price
/// move), a diagonal of fund supply slopes (fund units per dollar of fund
/// price move), and the N x K matrix of fund weight vectors in shares.
template <typename Scalar>
struct LiquidityModel {
    VectorX<Scalar> psi_id;  ///< length N, strictly positive
    VectorX<Scalar> psi_f;   ///< length K, strictly positive
    MatrixX<Scalar> W;       ///< N x K, column k = fund k weights

    Index n_assets() const { return psi_id.size(); }
    Index n_funds() const { return psi_f.size(); }

    /// Throws std::invalid_argument on dimension mismatch or non-positive
    /// liquidity. Rank of W is checked downstream where it matters (the
    /// K x K capacitance matrix is singular iff the columns are dependent).
    void validate() const {
        const Index n = n_assets();
        const Index k = n_funds();
        if (n < 1) throw std::invalid_argument("LiquidityModel: need at least one asset");
        if (W.rows() != n || W.cols() != k) {
            throw std::invalid_argument(
                "LiquidityModel: W must be n_assets x n_funds, got " +
                std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
        }
        if (k > n) throw std::invalid_argument("LiquidityModel: more funds than assets");
        for (Index i = 0; i < n; ++i) {
            if (!(psi_id[i] > Scalar(0))) {
                throw std::invalid_argument("LiquidityModel: psi_id[" + std::to_string(i) +
                                            "] must be > 0");
            }
        }
        for (Index j = 0; j < k; ++j) {
            if (!(psi_f[j] > Scalar(0))) {
                throw std::invalid_argument("LiquidityModel: psi_f[" + std::to_string(j) +
                                            "] must be > 0");
            }
        }
        if (k > 0) {
            Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(W);
            if (qr.rank() < k) {
                throw std::invalid_argument(
                    "LiquidityModel: fund weight vectors are linearly dependent");
            }
        }
    }

    /// Model with both liquidity diagonals scaled (W unchanged).
    LiquidityModel scaled(Scalar c_id, Scalar c_f) const {
        return LiquidityModel{psi_id * c_id, psi_f * c_f, W};
    }
};

using LiquidityModelXd = LiquidityModel<double>;

/// Arrival prices, one per asset, all strictly positive.
template <typename Scalar>
struct PriceState {
    VectorX<Scalar> p;

    void validate() const {
        if (p.size() < 1) throw std::invalid_argument("PriceState: empty price vector");
        for (Index i = 0; i < p.size(); ++i) {
            if (!(p[i] > Scalar(0))) {
                throw std::invalid_argument("PriceState: p[" + std::to_string(i) +
                                            "] must be > 0");
            }
        }
    }
};

using PriceStateXd = PriceState<double>;

/// Rescales a share/dollar model to notional/return units:
///   psi_id_i -> p_i^2 psi_id_i,  psi_f_k -> (w_k'p)^2 psi_f_k,
///   w_k      -> P w_k / (p'w_k).
/// The implementation shortfall of v in share units equals that of
/// v_tilde = P v in the rescaled model.
template <typename Scalar>
LiquidityModel<Scalar> to_notional_units(const LiquidityModel<Scalar>& model,
                                         const PriceState<Scalar>& prices) {
    model.validate();
    prices.validate();
    if (prices.p.size() != model.n_assets()) {
        throw std::invalid_argument("to_notional_units: price/asset dimension mismatch");
    }
    LiquidityModel<Scalar> out;
    out.psi_id = model.psi_id.cwiseProduct(prices.p.cwiseAbs2());
    out.psi_f.resize(model.n_funds());
    out.W.resize(model.W.rows(), model.W.cols());
    for (Index k = 0; k < model.n_funds(); ++k) {
        const Scalar fund_price = model.W.col(k).dot(prices.p);
        if (fund_price == Scalar(0)) {
            throw std::invalid_argument("to_notional_units: fund " + std::to_string(k) +
                                        " has zero dollar price (p'w_k = 0)");
        }
        out.psi_f[k] = fund_price * fund_price * model.psi_f[k];
        out.W.col(k) = prices.p.cwiseProduct(model.W.col(k)) / fund_price;
    }
    out.validate();
    return out;
}

/// Per-period liquidity over a trading horizon. All periods share the fund
/// weight matrix W. Individual period entries may be zero (a period in
/// which one side provides no liquidity); the per-asset and per-fund
/// totals over the horizon must be strictly positive so that the total
/// daily liquidity matrix is invertible.
template <typename Scalar>
struct IntradayLiquidity {
    MatrixX<Scalar> psi_id;  ///< T x N, row t = single-stock liquidity in period t
    MatrixX<Scalar> psi_f;   ///< T x K
    MatrixX<Scalar> W;       ///< N x K, shared across periods

    Index periods() const { return psi_id.rows(); }
    Index n_assets() const { return psi_id.cols(); }
    Index n_funds() const { return psi_f.cols(); }

    void validate() const {
        if (periods() < 1) throw std::invalid_argument("IntradayLiquidity: need T >= 1");
        if (psi_f.rows() != periods()) {
            throw std::invalid_argument("IntradayLiquidity: psi_id/psi_f period mismatch");
        }
        if (W.rows() != n_assets() || W.cols() != n_funds()) {
            throw std::invalid_argument("IntradayLiquidity: W dimension mismatch");
        }
        if ((psi_id.array() < Scalar(0)).any() || (psi_f.array() < Scalar(0)).any()) {
            throw std::invalid_argument("IntradayLiquidity: negative liquidity entry");
        }
        if (!((psi_id.colwise().sum().array() > Scalar(0)).all())) {
            throw std::invalid_argument(
                "IntradayLiquidity: an asset has zero total liquidity over the horizon");
        }
        if (!((psi_f.colwise().sum().array() > Scalar(0)).all())) {
            throw std::invalid_argument(
                "IntradayLiquidity: a fund has zero total liquidity over the horizon");
        }
    }

    /// Liquidity of period t (entries may be zero; see validate()).
    LiquidityModel<Scalar> period(Index t) const {
        return LiquidityModel<Scalar>{psi_id.row(t).transpose(), psi_f.row(t).transpose(), W};
    }

    /// Total daily liquidity, summed over periods. Strictly positive by the
    /// class invariant, hence a valid LiquidityModel.
    LiquidityModel<Scalar> total() const {
        return LiquidityModel<Scalar>{psi_id.colwise().sum().transpose(),
                                      psi_f.colwise().sum().transpose(), W};
    }

    /// Parametric horizon: period t carries alpha_t (resp. beta_t) times the
    /// daily single-stock (resp. fund) liquidity.
    static IntradayLiquidity from_profile(const LiquidityModel<Scalar>& daily,
                                          const NonDeduced<VectorRef<Scalar>>& alpha,
                                          const NonDeduced<VectorRef<Scalar>>& beta) {
        daily.validate();
        if (alpha.size() != beta.size() || alpha.size() < 1) {
            throw std::invalid_argument("IntradayLiquidity: alpha/beta length mismatch");
        }
        IntradayLiquidity out;
        out.psi_id = alpha * daily.psi_id.transpose();
        out.psi_f = beta * daily.psi_f.transpose();
        out.W = daily.W;
        out.validate();
        return out;
    }
};

using IntradayLiquidityXd = IntradayLiquidity<double>;

}  // namespace crossimpact
