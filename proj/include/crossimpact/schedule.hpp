#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "crossimpact/impact.hpp"
#include "crossimpact/liquidity.hpp"
#include "crossimpact/mixture.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

/// An execution schedule: row t holds the (signed) shares traded in period
/// t, and the rows sum to the parent order x0.
template <typename Scalar>
struct Schedule {
    MatrixX<Scalar> v;    ///< T x N
    VectorX<Scalar> x0;   ///< length N

    Index periods() const { return v.rows(); }
    Index n_assets() const { return v.cols(); }

    void validate(Scalar tolerance = Scalar(1e-9)) const {
        if (v.rows() < 1 || v.cols() != x0.size()) {
            throw std::invalid_argument("Schedule: dimension mismatch");
        }
        const Scalar scale = std::max(Scalar(1), x0.template lpNorm<Eigen::Infinity>());
        const VectorX<Scalar> gap = v.colwise().sum().transpose() - x0;
        if (gap.template lpNorm<Eigen::Infinity>() > tolerance * scale) {
            throw std::invalid_argument("Schedule: rows do not sum to the parent order");
        }
    }
};

using ScheduleXd = Schedule<double>;

/// Minimum-cost schedule for a risk-neutral liquidator:
///   v_t = (Psi_id_t + W Psi_f_t W') (Psi_id_bar + W Psi_f_bar W')^-1 x0,
/// i.e. each period absorbs a share of the order proportional to the
/// liquidity it supplies, normalized by the total daily liquidity. The
/// Lagrange multiplier of the inventory constraint is G_t v_t, identical
/// across periods.
template <typename Scalar>
Schedule<Scalar> optimal_schedule(const IntradayLiquidity<Scalar>& liq,
                                  const NonDeduced<VectorRef<Scalar>>& x0,
                                  const ImpactOptions& opts = {}) {
    liq.validate();
    if (x0.size() != liq.n_assets()) {
        throw std::invalid_argument("optimal_schedule: x0 length mismatch");
    }
    Schedule<Scalar> out;
    out.x0 = x0;
    out.v.resize(liq.periods(), liq.n_assets());
    if (x0.isZero(Scalar(0))) {
        out.v.setZero();
        return out;
    }
    const LiquidityModel<Scalar> total = liq.total();
    const auto g_bar = build_impact_matrix(total, opts);
    const VectorX<Scalar> y = g_bar.apply(x0);  // = G_bar x0, the KKT multiplier
    const MatrixX<Scalar> wy = liq.W.transpose() * y;  // K x 1
    for (Index t = 0; t < liq.periods(); ++t) {
        VectorX<Scalar> v_t = liq.psi_id.row(t).transpose().cwiseProduct(y);
        if (liq.n_funds() > 0) {
            v_t.noalias() +=
                liq.W * liq.psi_f.row(t).transpose().cwiseProduct(wy.col(0)).eval();
        }
        out.v.row(t) = v_t.transpose();
    }
    return out;
}

/// Fund-direction tilt matrix W_hat = Psi_id^-1 W (Psi_f^-1 + W'Psi_id^-1 W)^-1
/// of the parametric closed form.
template <typename Scalar>
MatrixX<Scalar> tilt_directions(const LiquidityModel<Scalar>& daily) {
    daily.validate();
    const Index k = daily.n_funds();
    if (k == 0) return MatrixX<Scalar>(daily.n_assets(), 0);
    const MatrixX<Scalar> u = daily.psi_id.cwiseInverse().asDiagonal() * daily.W;
    MatrixX<Scalar> cap = daily.W.transpose() * u;
    cap.diagonal() += daily.psi_f.cwiseInverse();
    Eigen::LLT<MatrixX<Scalar>> llt(cap);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("tilt_directions: capacitance matrix not positive definite");
    }
    return llt.solve(u.transpose()).transpose();
}

/// Closed form of the optimal schedule under the parametric intraday
/// profile Psi_id_t = alpha_t Psi_id_bar, Psi_f_t = beta_t Psi_f_bar:
///   v_t = alpha_t x0 + (beta_t - alpha_t) W W_hat' x0.
/// The schedule follows the market profile and tilts toward the fund
/// directions in periods where fund activity outweighs single-stock
/// activity.
template <typename Scalar>
Schedule<Scalar> tilting_schedule(const LiquidityModel<Scalar>& daily,
                                  const MixtureProfile<Scalar>& profile,
                                  const NonDeduced<VectorRef<Scalar>>& x0) {
    daily.validate();
    profile.validate();
    if (x0.size() != daily.n_assets()) {
        throw std::invalid_argument("tilting_schedule: x0 length mismatch");
    }
    const Index t_count = profile.periods();
    Schedule<Scalar> out;
    out.x0 = x0;
    out.v.resize(t_count, daily.n_assets());
    VectorX<Scalar> tilt = VectorX<Scalar>::Zero(daily.n_assets());
    if (daily.n_funds() > 0) {
        const MatrixX<Scalar> w_hat = tilt_directions(daily);
        tilt.noalias() = daily.W * (w_hat.transpose() * x0);
    }
    for (Index t = 0; t < t_count; ++t) {
        out.v.row(t) =
            (profile.alpha[t] * x0 + (profile.beta[t] - profile.alpha[t]) * tilt).transpose();
    }
    return out;
}

/// Separable VWAP-style schedule: order i trades vol_alloc(t, i) * x0_i in
/// period t. Each column of vol_alloc must be a distribution over periods.
template <typename Scalar>
Schedule<Scalar> separable_vwap_schedule(const MatrixRef<Scalar>& vol_alloc,
                                         const NonDeduced<VectorRef<Scalar>>& x0) {
    if (vol_alloc.cols() != x0.size() || vol_alloc.rows() < 1) {
        throw std::invalid_argument("separable_vwap_schedule: dimension mismatch");
    }
    if ((vol_alloc.array() < Scalar(0)).any()) {
        throw std::invalid_argument("separable_vwap_schedule: negative volume fraction");
    }
    for (Index i = 0; i < vol_alloc.cols(); ++i) {
        using std::abs;
        if (abs(vol_alloc.col(i).sum() - Scalar(1)) > Scalar(1e-9)) {
            throw std::invalid_argument("separable_vwap_schedule: column " + std::to_string(i) +
                                        " of vol_alloc does not sum to 1");
        }
    }
    Schedule<Scalar> out;
    out.x0 = x0;
    out.v = vol_alloc.array().rowwise() * x0.transpose().array();
    return out;
}

/// Volume-allocation matrix induced by a mixture profile; identical across
/// assets under the homogeneous-theta assumption.
template <typename Scalar>
MatrixX<Scalar> profile_volume_allocation(const MixtureProfile<Scalar>& profile,
                                          Index n_assets) {
    profile.validate();
    const VectorX<Scalar> alloc = profile.volume_allocation();
    return alloc.replicate(1, n_assets);
}

}  // namespace crossimpact
