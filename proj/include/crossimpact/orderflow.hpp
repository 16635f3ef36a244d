#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossimpact/calibration.hpp"
#include "crossimpact/rng.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

/// Parameters of the compound-Poisson order-flow model. Single-stock order
/// counts arrive at rate alpha_t * lambda per asset, fund order counts at
/// rate beta_t * lambda shared across assets; order sizes are i.i.d. with
/// the given means and a common coefficient of variation.
struct OrderFlowParams {
    double lambda = 0.0;        ///< base daily arrival intensity
    double cv = 0.0;            ///< coefficient of variation of order sizes
    Eigen::VectorXd qbar_id;    ///< mean single-stock order notional, per asset
    double qbar_f = 0.0;        ///< mean fund order notional
    Eigen::VectorXd w_tilde;    ///< dollar-weighted fund ownership |w_1i|, >= 0
    Eigen::VectorXd alpha;      ///< single-stock intensity profile, sums to 1
    Eigen::VectorXd beta;       ///< fund intensity profile, sums to 1

    Index n_assets() const { return qbar_id.size(); }
    Index periods() const { return alpha.size(); }

    void validate() const {
        if (!(lambda > 0.0)) throw std::invalid_argument("OrderFlowParams: lambda must be > 0");
        if (!(cv >= 0.0)) throw std::invalid_argument("OrderFlowParams: cv must be >= 0");
        if (!(qbar_f > 0.0)) throw std::invalid_argument("OrderFlowParams: qbar_f must be > 0");
        if (n_assets() < 1) throw std::invalid_argument("OrderFlowParams: need assets");
        if (w_tilde.size() != n_assets()) {
            throw std::invalid_argument("OrderFlowParams: w_tilde length mismatch");
        }
        if ((qbar_id.array() <= 0.0).any()) {
            throw std::invalid_argument("OrderFlowParams: qbar_id entries must be > 0");
        }
        if ((w_tilde.array() < 0.0).any()) {
            throw std::invalid_argument("OrderFlowParams: w_tilde entries must be >= 0");
        }
        if (periods() < 1 || beta.size() != periods()) {
            throw std::invalid_argument("OrderFlowParams: alpha/beta length mismatch");
        }
        if ((alpha.array() < 0.0).any() || (beta.array() < 0.0).any()) {
            throw std::invalid_argument("OrderFlowParams: negative intensity entry");
        }
        if (std::abs(alpha.sum() - 1.0) > 1e-12 || std::abs(beta.sum() - 1.0) > 1e-12) {
            throw std::invalid_argument("OrderFlowParams: intensity profiles must sum to 1");
        }
    }

    /// Index-fund share of daily volume per asset:
    /// theta_i = |w_1i| qbar_f / (qbar_id_i + |w_1i| qbar_f).
    Eigen::VectorXd theta_per_asset() const {
        Eigen::VectorXd fund = w_tilde * qbar_f;
        return fund.cwiseQuotient(qbar_id + fund);
    }
};

/// Simulates the panel DVol_idt = Q_id,idt + |w_1i| Q_f,dt. The fund flow
/// Q_f,dt is drawn once per (day, period) and shared across assets; that
/// sharing is the sole source of cross-sectional volume correlation. Each
/// day consumes an independent sub-stream derived from (seed, day), so the
/// panel is reproducible and could be generated in any day order.
inline VolumePanel simulate_panel(const OrderFlowParams& params, Index days,
                                  std::uint64_t seed) {
    params.validate();
    if (days < 1) throw std::invalid_argument("simulate_panel: need at least one day");
    const Index t_count = params.periods();
    const Index n = params.n_assets();

    VolumePanel panel;
    panel.days = days;
    panel.periods = t_count;
    panel.assets = n;
    panel.dvol.resize(days * t_count, n);

    for (Index d = 0; d < days; ++d) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(d));
        for (Index t = 0; t < t_count; ++t) {
            const std::int64_t fund_orders = sample_poisson(rng, params.beta[t] * params.lambda);
            double fund_flow = 0.0;
            for (std::int64_t j = 0; j < fund_orders; ++j) {
                fund_flow += sample_gamma_mean_cv(rng, params.qbar_f, params.cv);
            }
            for (Index i = 0; i < n; ++i) {
                const std::int64_t orders =
                    sample_poisson(rng, params.alpha[t] * params.lambda);
                double flow = 0.0;
                for (std::int64_t j = 0; j < orders; ++j) {
                    flow += sample_gamma_mean_cv(rng, params.qbar_id[i], params.cv);
                }
                panel.at(d, t, i) = flow + params.w_tilde[i] * fund_flow;
            }
        }
    }
    return panel;
}

/// Closed-form moments of the simulated panel.
struct OrderFlowMoments {
    Eigen::MatrixXd mean;                   ///< T x N
    Eigen::MatrixXd variance;               ///< T x N
    std::vector<Eigen::MatrixXd> covariance;  ///< per period, N x N (diagonal = variance)
    std::vector<Eigen::MatrixXd> correl;      ///< per period, N x N (diagonal = 1)
    Eigen::MatrixXd vol_alloc;              ///< T x N, alpha_t (1-theta_i) + beta_t theta_i
    Eigen::VectorXd theta;                  ///< per asset
};

inline OrderFlowMoments theoretical_moments(const OrderFlowParams& params) {
    params.validate();
    const Index t_count = params.periods();
    const Index n = params.n_assets();
    const double size_factor = 1.0 + params.cv * params.cv;

    OrderFlowMoments out;
    out.mean.resize(t_count, n);
    out.variance.resize(t_count, n);
    out.covariance.assign(t_count, Eigen::MatrixXd::Zero(n, n));
    out.correl.assign(t_count, Eigen::MatrixXd::Identity(n, n));
    out.vol_alloc.resize(t_count, n);
    out.theta = params.theta_per_asset();

    for (Index t = 0; t < t_count; ++t) {
        const double a = params.alpha[t] * params.lambda;
        const double b = params.beta[t] * params.lambda;
        for (Index i = 0; i < n; ++i) {
            const double fund_i = params.w_tilde[i] * params.qbar_f;
            out.mean(t, i) = a * params.qbar_id[i] + b * fund_i;
            out.variance(t, i) =
                size_factor * (a * params.qbar_id[i] * params.qbar_id[i] + b * fund_i * fund_i);
            out.vol_alloc(t, i) =
                params.alpha[t] * (1.0 - out.theta[i]) + params.beta[t] * out.theta[i];
        }
        for (Index i = 0; i < n; ++i) {
            out.covariance[t](i, i) = out.variance(t, i);
            for (Index j = i + 1; j < n; ++j) {
                const double cov = b * params.w_tilde[i] * params.w_tilde[j] * size_factor *
                                   params.qbar_f * params.qbar_f;
                out.covariance[t](i, j) = cov;
                out.covariance[t](j, i) = cov;
                const double vv = out.variance(t, i) * out.variance(t, j);
                const double r = vv > 0.0 ? cov / std::sqrt(vv) : 0.0;
                out.correl[t](i, j) = r;
                out.correl[t](j, i) = r;
            }
        }
    }
    return out;
}

}  // namespace crossimpact
