#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossimpact/mixture.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

/// Panel of non-negative notional traded volumes over (day, period, asset).
/// Stored row-major over (day, period) so a day is a contiguous T x N block.
struct VolumePanel {
    Index days = 0;
    Index periods = 0;
    Index assets = 0;
    Eigen::MatrixXd dvol;  ///< (days * periods) x assets

    double at(Index d, Index t, Index i) const { return dvol(d * periods + t, i); }
    double& at(Index d, Index t, Index i) { return dvol(d * periods + t, i); }

    void validate() const {
        if (days < 1 || periods < 1 || assets < 1) {
            throw std::invalid_argument("VolumePanel: empty dimension");
        }
        if (dvol.rows() != days * periods || dvol.cols() != assets) {
            throw std::invalid_argument("VolumePanel: storage does not match dimensions");
        }
        if ((dvol.array() < 0.0).any()) {
            throw std::invalid_argument("VolumePanel: negative volume entry");
        }
    }
};

/// Observed (or model-implied) intraday market profiles: the fraction of
/// the day's volume trading in each period and the average pairwise volume
/// correlation per period.
struct MarketProfiles {
    Eigen::VectorXd avg_vol_alloc;
    Eigen::VectorXd avg_correl;

    Index periods() const { return avg_vol_alloc.size(); }

    void validate() const {
        if (avg_vol_alloc.size() < 1 || avg_vol_alloc.size() != avg_correl.size()) {
            throw std::invalid_argument("MarketProfiles: length mismatch");
        }
        if ((avg_vol_alloc.array() < 0.0).any()) {
            throw std::invalid_argument("MarketProfiles: negative volume fraction");
        }
        if (std::abs(avg_vol_alloc.sum() - 1.0) > 1e-9) {
            throw std::invalid_argument("MarketProfiles: volume fractions must sum to 1");
        }
        if ((avg_correl.array() < -1.0).any() || (avg_correl.array() > 1.0).any()) {
            throw std::invalid_argument("MarketProfiles: correlation outside [-1, 1]");
        }
    }
};

/// Full per-asset / per-pair statistics computed from a panel. Pairs whose
/// volumes have zero variance across days carry no correlation; they are
/// excluded (NaN in the matrix) and counted, and a period where every pair
/// is excluded reports a missing average.
struct PanelProfiles {
    Eigen::MatrixXd vol_alloc;                    ///< T x N
    std::vector<Eigen::MatrixXd> correl;          ///< per period, N x N, NaN = excluded
    Eigen::VectorXd avg_vol_alloc;                ///< T
    std::vector<std::optional<double>> avg_correl;
    Index excluded_pairs = 0;

    MarketProfiles to_market_profiles() const {
        MarketProfiles out;
        out.avg_vol_alloc = avg_vol_alloc;
        out.avg_correl.resize(static_cast<Index>(avg_correl.size()));
        for (std::size_t t = 0; t < avg_correl.size(); ++t) {
            if (!avg_correl[t]) {
                throw std::runtime_error(
                    "PanelProfiles: average correlation missing in period " + std::to_string(t) +
                    " (all pairs had zero variance)");
            }
            out.avg_correl[static_cast<Index>(t)] = *avg_correl[t];
        }
        return out;
    }
};

namespace detail {

/// Kahan-compensated accumulator; keeps panel statistics reproducible
/// independent of how the summation is chunked.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace detail

/// Intraday volume and correlation statistics of a panel: per-asset volume
/// allocations (means over days, normalized across periods), per-pair
/// Pearson correlations over days for each period, and their
/// cross-sectional averages.
inline PanelProfiles compute_profiles(const VolumePanel& panel) {
    panel.validate();
    if (panel.days < 2) {
        throw std::invalid_argument("compute_profiles: need at least 2 days for correlations");
    }
    const Index d_count = panel.days;
    const Index t_count = panel.periods;
    const Index n = panel.assets;

    PanelProfiles out;
    out.vol_alloc.resize(t_count, n);
    out.avg_vol_alloc.resize(t_count);
    out.correl.assign(t_count, Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN()));
    out.avg_correl.assign(t_count, std::nullopt);

    // Mean volume per (period, asset).
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(t_count, n);
    for (Index t = 0; t < t_count; ++t) {
        for (Index i = 0; i < n; ++i) {
            detail::KahanSum acc;
            for (Index d = 0; d < d_count; ++d) acc.add(panel.at(d, t, i));
            mean(t, i) = acc.sum / static_cast<double>(d_count);
        }
    }

    const Eigen::VectorXd daily_mean = mean.colwise().sum().transpose();
    for (Index i = 0; i < n; ++i) {
        if (!(daily_mean[i] > 0.0)) {
            throw std::invalid_argument("compute_profiles: asset " + std::to_string(i) +
                                        " traded zero volume on average");
        }
    }
    out.vol_alloc = mean.array().rowwise() / daily_mean.transpose().array();
    out.avg_vol_alloc = out.vol_alloc.rowwise().mean();

    for (Index t = 0; t < t_count; ++t) {
        // Centered cross-products over days.
        Eigen::MatrixXd cp = Eigen::MatrixXd::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = i; j < n; ++j) {
                detail::KahanSum acc;
                for (Index d = 0; d < d_count; ++d) {
                    acc.add((panel.at(d, t, i) - mean(t, i)) * (panel.at(d, t, j) - mean(t, j)));
                }
                cp(i, j) = acc.sum;
                cp(j, i) = acc.sum;
            }
        }
        // An asset whose volumes are constant across days has a centered
        // sum of squares at rounding-noise level; treat it as zero variance.
        std::vector<bool> degenerate(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const double scale = static_cast<double>(d_count) * mean(t, i) * mean(t, i);
            degenerate[static_cast<std::size_t>(i)] =
                !(cp(i, i) > 1e-24 * std::max(scale, 1e-300));
        }
        detail::KahanSum corr_acc;
        Index valid_pairs = 0;
        for (Index i = 0; i < n; ++i) {
            out.correl[t](i, i) = 1.0;
            for (Index j = i + 1; j < n; ++j) {
                if (degenerate[static_cast<std::size_t>(i)] ||
                    degenerate[static_cast<std::size_t>(j)]) {
                    ++out.excluded_pairs;
                    continue;
                }
                const double r = cp(i, j) / std::sqrt(cp(i, i) * cp(j, j));
                out.correl[t](i, j) = r;
                out.correl[t](j, i) = r;
                corr_acc.add(r);
                ++valid_pairs;
            }
        }
        if (valid_pairs > 0) {
            out.avg_correl[static_cast<std::size_t>(t)] =
                corr_acc.sum / static_cast<double>(valid_pairs);
        }
    }
    return out;
}

/// Market profiles implied by a mixture (theta, alpha, beta):
///   avg_vol_alloc_t = alpha_t (1-theta) + beta_t theta,
///   avg_correl_t    = beta_t theta^2 / (alpha_t (1-theta)^2 + beta_t theta^2).
inline MarketProfiles forward_profiles(const MixtureProfileXd& profile) {
    profile.validate();
    const Index t_count = profile.periods();
    MarketProfiles out;
    out.avg_vol_alloc = profile.volume_allocation();
    out.avg_correl.resize(t_count);
    const double th = profile.theta;
    for (Index t = 0; t < t_count; ++t) {
        const double numer = profile.beta[t] * th * th;
        const double denom = profile.alpha[t] * (1.0 - th) * (1.0 - th) + numer;
        out.avg_correl[t] = denom > 0.0 ? numer / denom : 0.0;
    }
    return out;
}

struct CalibrationOptions {
    double theta_min = 1e-4;
    double theta_max = 1.0 - 1e-4;
    double theta_tolerance = 1e-10;
    Index scan_points = 512;          ///< coarse bracketing scan before golden section
    double consistency_threshold = 1e-6;  ///< residual above this flags inconsistent data
};

struct CalibrationResult {
    MixtureProfileXd profile;
    double residual = 0.0;          ///< (sum alpha - 1)^2 + (sum beta - 1)^2 at theta-hat
    bool model_consistent = true;   ///< residual within the consistency threshold
    Index clipped_negative = 0;     ///< observed negative correlations clipped to 0
};

/// Inverts the forward map: for a candidate theta each period gives
///   k_t = C_t (1-theta)^2 / ((1-C_t) theta^2),  alpha_t = V_t / ((1-theta) + k_t theta),
///   beta_t = k_t alpha_t,
/// and theta is chosen to make both intensity profiles sum to one. The two
/// normalization constraints overdetermine the single scalar, so theta
/// minimizes the squared residual of the two sums; on model-consistent
/// data the minimum is an exact root.
inline CalibrationResult calibrate(const MarketProfiles& observed,
                                   const CalibrationOptions& options = {}) {
    observed.validate();
    const Index t_count = observed.periods();
    if (t_count < 2) {
        throw std::invalid_argument("calibrate: need at least two periods");
    }

    CalibrationResult result;
    Eigen::VectorXd correl = observed.avg_correl;
    for (Index t = 0; t < t_count; ++t) {
        if (correl[t] < 0.0) {
            correl[t] = 0.0;  // the mixture model cannot produce negative correlation
            ++result.clipped_negative;
        }
        if (correl[t] >= 1.0) {
            throw std::invalid_argument("calibrate: avg_correl[" + std::to_string(t) +
                                        "] = 1 implies an infinite intensity ratio");
        }
    }
    const Eigen::VectorXd& vol = observed.avg_vol_alloc;

    const auto profiles_at = [&](double theta, Eigen::VectorXd& alpha, Eigen::VectorXd& beta) {
        const double om = 1.0 - theta;
        for (Index t = 0; t < t_count; ++t) {
            const double k = correl[t] * om * om / ((1.0 - correl[t]) * theta * theta);
            alpha[t] = vol[t] / (om + k * theta);
            beta[t] = k * alpha[t];
        }
    };
    Eigen::VectorXd alpha(t_count);
    Eigen::VectorXd beta(t_count);
    const auto residual_at = [&](double theta) {
        profiles_at(theta, alpha, beta);
        const double da = alpha.sum() - 1.0;
        const double db = beta.sum() - 1.0;
        return da * da + db * db;
    };

    // Coarse scan to bracket the global minimum, then golden section.
    double best_theta = options.theta_min;
    double best_res = residual_at(best_theta);
    const Index scans = std::max<Index>(options.scan_points, 8);
    for (Index j = 1; j <= scans; ++j) {
        const double theta = options.theta_min +
                             (options.theta_max - options.theta_min) *
                                 static_cast<double>(j) / static_cast<double>(scans);
        const double res = residual_at(theta);
        if (res < best_res) {
            best_res = res;
            best_theta = theta;
        }
    }
    const double span = (options.theta_max - options.theta_min) / static_cast<double>(scans);
    double lo = std::max(options.theta_min, best_theta - span);
    double hi = std::min(options.theta_max, best_theta + span);

    const double inv_phi = 0.6180339887498948482;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = residual_at(x1);
    double f2 = residual_at(x2);
    while (hi - lo > options.theta_tolerance) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = residual_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = residual_at(x2);
        }
    }
    const double theta_hat = 0.5 * (lo + hi);
    result.residual = residual_at(theta_hat);
    result.model_consistent = result.residual <= options.consistency_threshold;

    profiles_at(theta_hat, alpha, beta);
    result.profile.theta = theta_hat;
    result.profile.alpha = alpha / alpha.sum();
    result.profile.beta = beta / beta.sum();
    result.profile.validate();
    return result;
}

}  // namespace crossimpact
