#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossimpact/liquidity.hpp"
#include "crossimpact/mixture.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

/// Single-fund (K = 1) setting for the exact separable-vs-coupled cost
/// ratio analysis.
template <typename Scalar>
struct CostRatioInputs {
    LiquidityModel<Scalar> daily;    ///< K must equal 1
    MixtureProfile<Scalar> profile;  ///< alpha_t strictly positive
    VectorX<Scalar> x0;

    void validate() const {
        daily.validate();
        profile.validate();
        if (daily.n_funds() != 1) {
            throw std::invalid_argument("CostRatioInputs: closed form requires exactly one fund");
        }
        if (x0.size() != daily.n_assets()) {
            throw std::invalid_argument("CostRatioInputs: x0 length mismatch");
        }
        if (x0.isZero(Scalar(0))) {
            throw std::invalid_argument("CostRatioInputs: x0 must be non-zero");
        }
        if (!((profile.alpha.array() > Scalar(0)).all())) {
            throw std::invalid_argument("CostRatioInputs: alpha_t must be strictly positive");
        }
    }
};

using CostRatioInputsXd = CostRatioInputs<double>;

template <typename Scalar>
struct CostRatioReport {
    Scalar upsilon = Scalar(1);    ///< separable cost / optimal cost, >= 1
    Scalar eta1 = Scalar(0);       ///< psi_f_1 w1' Psi_id^-1 w1
    VectorX<Scalar> gamma;         ///< beta_t / alpha_t
    Scalar delta = Scalar(0);      ///< intraday-variation term
    Scalar base_term = Scalar(1);  ///< 1 + theta^2 (sum beta^2/alpha - 1)
};

using CostRatioReportXd = CostRatioReport<double>;

/// Fund-vs-single-stock liquidity ratio along the fund direction.
template <typename Scalar>
Scalar fund_liquidity_ratio(const LiquidityModel<Scalar>& daily) {
    if (daily.n_funds() != 1) {
        throw std::invalid_argument("fund_liquidity_ratio: requires exactly one fund");
    }
    const VectorX<Scalar> w = daily.W.col(0);
    return daily.psi_f[0] * w.cwiseAbs2().cwiseQuotient(daily.psi_id).sum();
}

/// Fund liquidity that attains a requested eta1 with Psi_id and w1 fixed.
template <typename Scalar>
Scalar rescaled_fund_liquidity(const LiquidityModel<Scalar>& daily, Scalar eta1) {
    if (daily.n_funds() != 1) {
        throw std::invalid_argument("rescaled_fund_liquidity: requires exactly one fund");
    }
    const VectorX<Scalar> w = daily.W.col(0);
    return eta1 / w.cwiseAbs2().cwiseQuotient(daily.psi_id).sum();
}

template <typename Scalar>
Scalar ratio_base_term(Scalar theta, const NonDeduced<VectorRef<Scalar>>& alpha,
                       const NonDeduced<VectorRef<Scalar>>& beta) {
    Scalar sum = Scalar(0);
    for (Index t = 0; t < alpha.size(); ++t) {
        if (!(alpha[t] > Scalar(0))) {
            throw std::invalid_argument("ratio_base_term: alpha_t must be strictly positive");
        }
        sum += beta[t] * beta[t] / alpha[t];
    }
    return Scalar(1) + theta * theta * (sum - Scalar(1));
}

/// Delta = sum_t alpha_t (1 - theta (1 - gamma_t))^2 (1 - gamma_t) / (1 + eta1 gamma_t),
/// with gamma_t = beta_t / alpha_t. Its sign decides whether the fund
/// portfolio or its orthogonal complement is the worst case.
template <typename Scalar>
Scalar ratio_delta_term(Scalar theta, const NonDeduced<VectorRef<Scalar>>& alpha,
                        const NonDeduced<VectorRef<Scalar>>& beta, Scalar eta1) {
    Scalar sum = Scalar(0);
    for (Index t = 0; t < alpha.size(); ++t) {
        if (!(alpha[t] > Scalar(0))) {
            throw std::invalid_argument("ratio_delta_term: alpha_t must be strictly positive");
        }
        const Scalar gamma_t = beta[t] / alpha[t];
        const Scalar tilt = Scalar(1) - theta * (Scalar(1) - gamma_t);
        sum += alpha[t] * tilt * tilt * (Scalar(1) - gamma_t) / (Scalar(1) + eta1 * gamma_t);
    }
    return sum;
}

/// Exact closed-form cost ratio of separable VWAP execution over the
/// optimal coupled schedule. The alignment factor collapses to zero when
/// x0 is orthogonal (in the Psi_id^-1 metric) to the fund direction; the
/// orthogonality test uses a relative tolerance of 1e-10.
template <typename Scalar>
CostRatioReport<Scalar> cost_ratio(const CostRatioInputs<Scalar>& inputs) {
    inputs.validate();
    const auto& daily = inputs.daily;
    const auto& profile = inputs.profile;

    CostRatioReport<Scalar> report;
    report.eta1 = fund_liquidity_ratio(daily);
    report.gamma = profile.beta.cwiseQuotient(profile.alpha);
    report.base_term = ratio_base_term<Scalar>(profile.theta, profile.alpha, profile.beta);
    report.delta =
        ratio_delta_term<Scalar>(profile.theta, profile.alpha, profile.beta, report.eta1);

    const VectorX<Scalar> w = daily.W.col(0);
    const VectorX<Scalar> id_inv_w = w.cwiseQuotient(daily.psi_id);
    const Scalar alignment = id_inv_w.dot(inputs.x0);
    const Scalar align_scale = id_inv_w.norm() * inputs.x0.norm();

    Scalar f = Scalar(0);
    if (std::abs(alignment) > Scalar(1e-10) * align_scale) {
        const Scalar x_quad = inputs.x0.cwiseAbs2().cwiseQuotient(daily.psi_id).sum();
        f = Scalar(1) / (x_quad / (alignment * alignment) * (Scalar(1) + report.eta1) /
                             daily.psi_f[0] -
                         Scalar(1));
    }
    report.upsilon = report.base_term + report.delta * f;
    return report;
}

enum class WorstCasePortfolio {
    Market,      ///< x0 = w1 maximizes the ratio (Delta > 0)
    Orthogonal,  ///< x0 orthogonal to w1 maximizes the ratio (Delta < 0)
    Tie,         ///< Delta = 0, the ratio is flat in the alignment
};

template <typename Scalar>
struct CostRatioExtremes {
    Scalar upsilon_market = Scalar(1);
    Scalar upsilon_orth = Scalar(1);
    Scalar delta = Scalar(0);
    WorstCasePortfolio which_is_max = WorstCasePortfolio::Tie;
};

/// Ratio at the two extreme portfolios, x0 = w1 and x0 perpendicular to w1
/// in the Psi_id^-1 metric; every other portfolio lies between them.
template <typename Scalar>
CostRatioExtremes<Scalar> cost_ratio_extremes(const LiquidityModel<Scalar>& daily,
                                              const MixtureProfile<Scalar>& profile) {
    daily.validate();
    profile.validate();
    if (daily.n_funds() != 1) {
        throw std::invalid_argument("cost_ratio_extremes: requires exactly one fund");
    }
    if (!((profile.alpha.array() > Scalar(0)).all())) {
        throw std::invalid_argument("cost_ratio_extremes: alpha_t must be strictly positive");
    }
    CostRatioExtremes<Scalar> out;
    const Scalar eta1 = fund_liquidity_ratio(daily);
    const Scalar base = ratio_base_term<Scalar>(profile.theta, profile.alpha, profile.beta);
    out.delta = ratio_delta_term<Scalar>(profile.theta, profile.alpha, profile.beta, eta1);
    out.upsilon_market = base + eta1 * out.delta;
    out.upsilon_orth = base;
    out.which_is_max = out.delta > Scalar(0)   ? WorstCasePortfolio::Market
                       : out.delta < Scalar(0) ? WorstCasePortfolio::Orthogonal
                                               : WorstCasePortfolio::Tie;
    return out;
}

template <typename Scalar>
struct MarketRatioPoint {
    Scalar eta1;
    Scalar upsilon_market;
};

/// Upsilon_market as a function of eta1, treating eta1 as a free parameter
/// (fund liquidity rescaled, Psi_id and w1 fixed). Decreases up to
/// eta1 = theta/(1-theta), where it equals 1, and increases afterwards
/// toward 1 + (1-theta)^2 (sum alpha^2/beta - 1).
template <typename Scalar>
std::vector<MarketRatioPoint<Scalar>> market_ratio_curve(const LiquidityModel<Scalar>& daily,
                                                         const MixtureProfile<Scalar>& profile,
                                                         const std::vector<Scalar>& eta1_grid) {
    daily.validate();
    profile.validate();
    if (daily.n_funds() != 1) {
        throw std::invalid_argument("market_ratio_curve: requires exactly one fund");
    }
    if (profile.theta >= Scalar(1)) {
        throw std::invalid_argument(
            "market_ratio_curve: theta = 1 leaves the turning point theta/(1-theta) undefined");
    }
    if (eta1_grid.empty()) {
        throw std::invalid_argument("market_ratio_curve: empty eta1 grid");
    }
    const Scalar base = ratio_base_term<Scalar>(profile.theta, profile.alpha, profile.beta);
    std::vector<MarketRatioPoint<Scalar>> curve;
    curve.reserve(eta1_grid.size());
    for (const Scalar eta1 : eta1_grid) {
        if (!(eta1 >= Scalar(0))) {
            throw std::invalid_argument("market_ratio_curve: eta1 grid entries must be >= 0");
        }
        const Scalar delta =
            ratio_delta_term<Scalar>(profile.theta, profile.alpha, profile.beta, eta1);
        curve.push_back({eta1, base + eta1 * delta});
    }
    return curve;
}

template <typename Scalar>
struct SingleStockRatio {
    Scalar upsilon = Scalar(1);
    Scalar eta1_i = Scalar(0);         ///< w_1i^2 psi_f_1 / psi_id_i
    Index most_costly_asset = 0;       ///< argmax over assets of Upsilon(e_i)
};

/// Cost ratio of liquidating a single order e_i, plus the asset for which
/// that ratio is largest. The ranking is by w_1i^2 / psi_id_i, ascending or
/// descending with the sign of Delta.
template <typename Scalar>
SingleStockRatio<Scalar> single_stock_ratio(const LiquidityModel<Scalar>& daily,
                                            const MixtureProfile<Scalar>& profile, Index asset) {
    daily.validate();
    profile.validate();
    if (daily.n_funds() != 1) {
        throw std::invalid_argument("single_stock_ratio: requires exactly one fund");
    }
    if (asset < 0 || asset >= daily.n_assets()) {
        throw std::invalid_argument("single_stock_ratio: asset index out of range");
    }
    if (!((profile.alpha.array() > Scalar(0)).all())) {
        throw std::invalid_argument("single_stock_ratio: alpha_t must be strictly positive");
    }
    const Scalar eta1 = fund_liquidity_ratio(daily);
    const Scalar base = ratio_base_term<Scalar>(profile.theta, profile.alpha, profile.beta);
    const Scalar delta =
        ratio_delta_term<Scalar>(profile.theta, profile.alpha, profile.beta, eta1);

    const auto eta1_of = [&](Index i) {
        const Scalar w1i = daily.W(i, 0);
        return w1i * w1i * daily.psi_f[0] / daily.psi_id[i];
    };

    SingleStockRatio<Scalar> out;
    out.eta1_i = eta1_of(asset);
    out.upsilon = base + delta * out.eta1_i / (Scalar(1) + eta1 - out.eta1_i);

    Index best = 0;
    for (Index i = 1; i < daily.n_assets(); ++i) {
        const bool larger = eta1_of(i) > eta1_of(best);
        if ((delta >= Scalar(0)) == larger) best = i;
    }
    out.most_costly_asset = best;
    return out;
}

/// Worst-case saving available to the coupled schedule in the abundant
/// fund-liquidity limit: 1 + (1-theta)^2 (sum alpha^2/beta - 1). Infinite
/// (nullopt) when any beta_t is zero.
template <typename Scalar>
std::optional<Scalar> theta_bound_summary(const MixtureProfile<Scalar>& profile) {
    profile.validate();
    Scalar sum = Scalar(0);
    for (Index t = 0; t < profile.periods(); ++t) {
        if (!(profile.beta[t] > Scalar(0))) return std::nullopt;
        sum += profile.alpha[t] * profile.alpha[t] / profile.beta[t];
    }
    const Scalar one_minus = Scalar(1) - profile.theta;
    return Scalar(1) + one_minus * one_minus * (sum - Scalar(1));
}

/// Numerical root of Delta(theta) on [0, 1] for fixed eta1: Delta >= 0 for
/// theta below the root and <= 0 above it. Returns nullopt when Delta is
/// identically zero (alpha = beta). The paper asserts existence of the
/// threshold without a closed form; this is a bisection on the quadratic.
template <typename Scalar>
std::optional<Scalar> delta_theta_threshold(const NonDeduced<VectorRef<Scalar>>& alpha,
                                            const NonDeduced<VectorRef<Scalar>>& beta, Scalar eta1,
                                            Scalar tolerance = Scalar(1e-12)) {
    const auto delta_at = [&](Scalar theta) {
        return ratio_delta_term<Scalar>(theta, alpha, beta, eta1);
    };
    Scalar lo = Scalar(0);
    Scalar hi = Scalar(1);
    const Scalar at_lo = delta_at(lo);
    const Scalar at_hi = delta_at(hi);
    if (at_lo == Scalar(0) && at_hi == Scalar(0)) return std::nullopt;
    if (at_lo <= Scalar(0)) return lo;
    if (at_hi >= Scalar(0)) return hi;
    while (hi - lo > tolerance) {
        const Scalar mid = (lo + hi) / Scalar(2);
        (delta_at(mid) >= Scalar(0) ? lo : hi) = mid;
    }
    return (lo + hi) / Scalar(2);
}

/// Numerical root of Delta(eta1) on [theta/(1-theta), inf) for fixed theta:
/// Delta <= 0 below the root and >= 0 above it. Returns nullopt when Delta
/// stays negative over the whole searchable range (threshold at infinity).
template <typename Scalar>
std::optional<Scalar> delta_eta1_threshold(Scalar theta, const NonDeduced<VectorRef<Scalar>>& alpha,
                                           const NonDeduced<VectorRef<Scalar>>& beta,
                                           Scalar eta1_cap = Scalar(1e12),
                                           Scalar tolerance = Scalar(1e-10)) {
    if (!(theta >= Scalar(0)) || !(theta < Scalar(1))) {
        throw std::invalid_argument("delta_eta1_threshold: theta must lie in [0, 1)");
    }
    const auto delta_at = [&](Scalar eta1) {
        return ratio_delta_term<Scalar>(theta, alpha, beta, eta1);
    };
    Scalar lo = theta / (Scalar(1) - theta);
    if (delta_at(lo) >= Scalar(0)) return lo;
    Scalar hi = std::max(Scalar(1), Scalar(2) * lo);
    while (delta_at(hi) < Scalar(0)) {
        hi *= Scalar(4);
        if (hi > eta1_cap) return std::nullopt;
    }
    while (hi - lo > tolerance * std::max(Scalar(1), hi)) {
        const Scalar mid = (lo + hi) / Scalar(2);
        (delta_at(mid) < Scalar(0) ? lo : hi) = mid;
    }
    return (lo + hi) / Scalar(2);
}

}  // namespace crossimpact
