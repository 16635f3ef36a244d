#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "crossimpact/liquidity.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

struct ImpactOptions {
    /// G is materialized densely up to this many assets; above it the
    /// operator stays implicit (diagonal + low-rank factors), which is all
    /// the scheduler and cost analysis need.
    Index dense_threshold = 2048;
    /// Reject models whose K x K capacitance matrix has condition number
    /// above this; near-dependent fund weights otherwise produce silently
    /// garbage schedules.
    double max_condition = 1e12;
    /// Drop funds whose liquidity is exactly zero instead of rejecting.
    /// Used internally when slicing an intraday horizon into periods.
    bool drop_zero_fund_liquidity = false;
};

/// Price-impact operator G = (Psi_id + W Psi_f W')^-1, held in Woodbury
/// form: G = Psi_id^-1 - U M^-1 U' with U = Psi_id^-1 W and
/// M = Psi_f^-1 + W' Psi_id^-1 W. Only the K x K matrix M is factorized.
/// Immutable after construction; all evaluation methods are const and
/// safe to call concurrently.
template <typename Scalar>
class ImpactMatrix {
  public:
    static ImpactMatrix build(const VectorRef<Scalar>& psi_id, const VectorRef<Scalar>& psi_f,
                              const MatrixRef<Scalar>& w, const ImpactOptions& opts = {}) {
        ImpactMatrix g;
        g.init(psi_id, psi_f, w, opts);
        return g;
    }

    Index rows() const { return d_inv_.size(); }
    Index n_funds() const { return u_.cols(); }
    bool has_dense() const { return has_dense_; }

    /// G v.
    VectorX<Scalar> apply(const VectorRef<Scalar>& v) const {
        check_dim(v.size());
        VectorX<Scalar> out = d_inv_.cwiseProduct(v);
        if (u_.cols() > 0) out.noalias() -= u_ * cap_llt_.solve(u_.transpose() * v);
        return out;
    }

    /// v' G v (one K x K solve; strictly positive for v != 0).
    Scalar quadratic_form(const VectorRef<Scalar>& v) const {
        check_dim(v.size());
        Scalar q = v.cwiseAbs2().dot(d_inv_);
        if (u_.cols() > 0) {
            const VectorX<Scalar> z = u_.transpose() * v;
            q -= z.dot(cap_llt_.solve(z));
        }
        return q;
    }

    /// G^-1 z = (Psi_id + W Psi_f W') z; no inversion needed.
    VectorX<Scalar> solve(const VectorRef<Scalar>& z) const {
        check_dim(z.size());
        VectorX<Scalar> out = psi_id_.cwiseProduct(z);
        if (w_.cols() > 0) out.noalias() += w_ * psi_f_.cwiseProduct(w_.transpose() * z).eval();
        return out;
    }

    /// Dense G; available when rows() <= dense_threshold. Exactly symmetric
    /// by construction (rank update touches one triangle only).
    const MatrixX<Scalar>& dense() const {
        if (!has_dense_) {
            throw std::logic_error("ImpactMatrix: dense form not materialized for N = " +
                                   std::to_string(rows()));
        }
        return dense_;
    }

    const VectorX<Scalar>& psi_id() const { return psi_id_; }
    const VectorX<Scalar>& psi_f() const { return psi_f_; }
    const MatrixX<Scalar>& fund_weights() const { return w_; }

  private:
    ImpactMatrix() = default;

    void init(const VectorRef<Scalar>& psi_id, const VectorRef<Scalar>& psi_f,
              const MatrixRef<Scalar>& w, const ImpactOptions& opts) {
        const Index n = psi_id.size();
        const Index k = psi_f.size();
        if (n < 1) throw std::invalid_argument("ImpactMatrix: need at least one asset");
        if (w.rows() != n || w.cols() != k) {
            throw std::invalid_argument("ImpactMatrix: W dimension mismatch");
        }
        for (Index i = 0; i < n; ++i) {
            if (!(psi_id[i] > Scalar(0))) {
                throw std::invalid_argument("ImpactMatrix: non-positive single-stock liquidity");
            }
        }

        psi_id_ = psi_id;
        d_inv_ = psi_id.cwiseInverse();

        // Select the funds that actually supply liquidity.
        Index kept = 0;
        psi_f_.resize(k);
        w_.resize(n, k);
        for (Index j = 0; j < k; ++j) {
            if (psi_f[j] > Scalar(0)) {
                psi_f_[kept] = psi_f[j];
                w_.col(kept) = w.col(j);
                ++kept;
            } else if (psi_f[j] == Scalar(0) && opts.drop_zero_fund_liquidity) {
                continue;
            } else {
                throw std::invalid_argument("ImpactMatrix: non-positive fund liquidity");
            }
        }
        psi_f_.conservativeResize(kept);
        w_.conservativeResize(n, kept);

        if (kept > 0) {
            u_ = d_inv_.asDiagonal() * w_;
            MatrixX<Scalar> cap = w_.transpose() * u_;
            cap.diagonal() += psi_f_.cwiseInverse();

            Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(cap);
            if (es.info() != Eigen::Success) {
                throw std::runtime_error("ImpactMatrix: capacitance eigendecomposition failed");
            }
            const Scalar lo = es.eigenvalues().minCoeff();
            const Scalar hi = es.eigenvalues().maxCoeff();
            if (!(lo > Scalar(0)) || hi / lo > Scalar(opts.max_condition)) {
                throw std::invalid_argument(
                    "ImpactMatrix: capacitance matrix is singular or ill-conditioned "
                    "(near-dependent fund weights); condition estimate " +
                    std::to_string(static_cast<double>(hi / lo)));
            }
            cap_llt_.compute(cap);
            if (cap_llt_.info() != Eigen::Success) {
                throw std::runtime_error("ImpactMatrix: Cholesky of capacitance matrix failed");
            }
        } else {
            u_.resize(n, 0);
        }

        if (n <= opts.dense_threshold) {
            dense_ = MatrixX<Scalar>::Zero(n, n);
            dense_.diagonal() = d_inv_;
            if (kept > 0) {
                // X = L^-1 U' so that U M^-1 U' = X'X; the self-adjoint rank
                // update keeps G bit-exactly symmetric.
                MatrixX<Scalar> x = cap_llt_.matrixL().solve(u_.transpose());
                dense_.template selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(),
                                                                           Scalar(-1));
                dense_.template triangularView<Eigen::StrictlyUpper>() =
                    dense_.transpose().template triangularView<Eigen::StrictlyUpper>();
            }
            has_dense_ = true;
        }
    }

    void check_dim(Index n) const {
        if (n != rows()) {
            throw std::invalid_argument("ImpactMatrix: vector length " + std::to_string(n) +
                                        " does not match N = " + std::to_string(rows()));
        }
    }

    VectorX<Scalar> psi_id_;
    VectorX<Scalar> psi_f_;  // kept funds only
    MatrixX<Scalar> w_;      // kept funds only
    VectorX<Scalar> d_inv_;
    MatrixX<Scalar> u_;
    Eigen::LLT<MatrixX<Scalar>> cap_llt_;
    MatrixX<Scalar> dense_;
    bool has_dense_ = false;
};

using ImpactMatrixXd = ImpactMatrix<double>;

template <typename Scalar>
ImpactMatrix<Scalar> build_impact_matrix(const LiquidityModel<Scalar>& model,
                                         const ImpactOptions& opts = {}) {
    model.validate();
    return ImpactMatrix<Scalar>::build(model.psi_id, model.psi_f, model.W, opts);
}

/// Equilibrium price change Delta p = G v for a one-period execution of v
/// shares.
template <typename Scalar>
VectorX<Scalar> price_impact(const LiquidityModel<Scalar>& model,
                             const NonDeduced<VectorRef<Scalar>>& v) {
    return build_impact_matrix(model).apply(v);
}

/// Market-clearing split of an executed trade: Psi_id dp shares come from
/// single-stock investors, W Psi_f W' dp from index funds; the two sum to v.
template <typename Scalar>
struct ClearingDecomposition {
    VectorX<Scalar> price_change;
    VectorX<Scalar> single_stock_shares;
    VectorX<Scalar> fund_shares;
};

template <typename Scalar>
ClearingDecomposition<Scalar> clearing_decomposition(const LiquidityModel<Scalar>& model,
                                                     const NonDeduced<VectorRef<Scalar>>& v) {
    const ImpactMatrix<Scalar> g = build_impact_matrix(model);
    ClearingDecomposition<Scalar> out;
    out.price_change = g.apply(v);
    out.single_stock_shares = model.psi_id.cwiseProduct(out.price_change);
    out.fund_shares.noalias() =
        model.W * model.psi_f.cwiseProduct(model.W.transpose() * out.price_change).eval();
    return out;
}

/// Expected implementation shortfall of executing v in one period: 1/2 v'Gv.
template <typename Scalar>
Scalar one_period_cost(const ImpactMatrix<Scalar>& g, const NonDeduced<VectorRef<Scalar>>& v) {
    return Scalar(0.5) * g.quadratic_form(v);
}

template <typename Scalar>
Scalar one_period_cost(const LiquidityModel<Scalar>& model,
                       const NonDeduced<VectorRef<Scalar>>& v) {
    return one_period_cost(build_impact_matrix(model), v);
}

namespace detail {

/// Quadratic cost 1/2 v' A^+ v for a positive semi-definite total-liquidity
/// matrix A = diag(psi_id) + W diag(psi_f) W' (some periods may carry zero
/// liquidity on one side). Returns nullopt when v has a component in the
/// null space of A beyond the span tolerance, i.e. the trade has infinite
/// expected cost in that period.
template <typename Scalar>
std::optional<Scalar> semidefinite_period_cost(const VectorRef<Scalar>& psi_id,
                                               const VectorRef<Scalar>& psi_f,
                                               const MatrixRef<Scalar>& w,
                                               const VectorRef<Scalar>& v,
                                               Scalar span_tolerance = Scalar(1e-8)) {
    const Index n = psi_id.size();
    MatrixX<Scalar> a = MatrixX<Scalar>::Zero(n, n);
    a.diagonal() = psi_id;
    for (Index k = 0; k < psi_f.size(); ++k) {
        if (psi_f[k] != Scalar(0)) {
            a.template selfadjointView<Eigen::Lower>().rankUpdate(w.col(k), psi_f[k]);
        }
    }
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(a);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("semidefinite_period_cost: eigendecomposition failed");
    }
    const Scalar v_norm = v.norm();
    if (v_norm == Scalar(0)) return Scalar(0);
    const Scalar lambda_max = es.eigenvalues().cwiseAbs().maxCoeff();
    const Scalar cutoff = lambda_max * Scalar(n) * std::numeric_limits<Scalar>::epsilon() *
                          Scalar(64);
    Scalar cost = Scalar(0);
    Scalar null_sq = Scalar(0);
    for (Index i = 0; i < n; ++i) {
        const Scalar proj = es.eigenvectors().col(i).dot(v);
        if (es.eigenvalues()[i] > cutoff) {
            cost += proj * proj / es.eigenvalues()[i];
        } else {
            null_sq += proj * proj;
        }
    }
    if (std::sqrt(null_sq) > span_tolerance * v_norm) return std::nullopt;
    return Scalar(0.5) * cost;
}

/// Per-period 1/2 v'G_t v for an intraday horizon. Uses the Woodbury route
/// when the period's single-stock liquidity is strictly positive, and the
/// semi-definite pseudo-inverse route otherwise.
template <typename Scalar>
std::optional<Scalar> period_cost(const IntradayLiquidity<Scalar>& liq, Index t,
                                  const NonDeduced<VectorRef<Scalar>>& v) {
    const VectorX<Scalar> psi_id_t = liq.psi_id.row(t).transpose();
    const VectorX<Scalar> psi_f_t = liq.psi_f.row(t).transpose();
    if ((psi_id_t.array() > Scalar(0)).all()) {
        ImpactOptions opts;
        opts.drop_zero_fund_liquidity = true;
        const auto g = ImpactMatrix<Scalar>::build(psi_id_t, psi_f_t, liq.W, opts);
        return one_period_cost(g, v);
    }
    return semidefinite_period_cost<Scalar>(psi_id_t, psi_f_t, liq.W, v);
}

}  // namespace detail

/// Total expected cost of a T x N trade matrix (row t executed in period t):
/// sum_t 1/2 v_t' G_t v_t. Returns nullopt when some period's trade falls
/// outside the range of that period's (possibly singular) liquidity, i.e.
/// the schedule has infinite expected cost.
template <typename Scalar>
std::optional<Scalar> total_cost(const IntradayLiquidity<Scalar>& liq,
                                 const NonDeduced<MatrixRef<Scalar>>& trades) {
    liq.validate();
    if (trades.rows() != liq.periods() || trades.cols() != liq.n_assets()) {
        throw std::invalid_argument("total_cost: schedule dimensions do not match horizon");
    }
    Scalar sum = Scalar(0);
    for (Index t = 0; t < liq.periods(); ++t) {
        const VectorX<Scalar> v_t = trades.row(t).transpose();
        const auto c = detail::period_cost(liq, t, v_t);
        if (!c) return std::nullopt;
        sum += *c;
    }
    return sum;
}

enum class ExtremeCase {
    NoFunds,    ///< all liquidity from single-stock investors
    FundsOnly,  ///< all liquidity supplied along fund weight vectors
};

/// Limiting one-period cost when one investor class vanishes. In the
/// funds-only limit only trades in span(W) have finite cost; nullopt marks
/// the infinite-cost case. Span membership is decided by the relative
/// least-squares residual of v against the columns of W.
template <typename Scalar>
std::optional<Scalar> extreme_case_cost(const LiquidityModel<Scalar>& model,
                                        const NonDeduced<VectorRef<Scalar>>& v, ExtremeCase which,
                                        Scalar span_tolerance = Scalar(1e-8)) {
    model.validate();
    if (v.size() != model.n_assets()) {
        throw std::invalid_argument("extreme_case_cost: trade vector length mismatch");
    }
    if (which == ExtremeCase::NoFunds) {
        return Scalar(0.5) * v.cwiseAbs2().cwiseQuotient(model.psi_id).sum();
    }
    const Scalar v_norm = v.norm();
    if (v_norm == Scalar(0)) return Scalar(0);
    if (model.n_funds() == 0) return std::nullopt;
    Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(model.W);
    const VectorX<Scalar> u = qr.solve(v);
    const Scalar residual = (model.W * u - v).norm();
    if (residual > span_tolerance * v_norm) return std::nullopt;
    return Scalar(0.5) * u.cwiseAbs2().cwiseQuotient(model.psi_f).sum();
}

}  // namespace crossimpact
