#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "crossimpact/impact.hpp"
#include "crossimpact/rng.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

/// Reduced-form impact coefficients: one shared single-stock coefficient
/// and one per fund, all strictly positive.
struct ImpactCoefficients {
    double gamma_id = 1.0;
    Eigen::VectorXd gamma_f;

    Index n_funds() const { return gamma_f.size(); }

    void validate() const {
        if (!(gamma_id > 0.0)) {
            throw std::invalid_argument("ImpactCoefficients: gamma_id must be > 0");
        }
        if ((gamma_f.array() <= 0.0).any()) {
            throw std::invalid_argument("ImpactCoefficients: gamma_f entries must be > 0");
        }
    }
};

/// One portfolio-execution observation: the notional trade vector, its
/// realized shortfall returns, the day's dollar-weighted fund matrix,
/// volume/volatility forecasts for assets and funds, and the (known) noise
/// covariance of the shortfall.
struct TransactionRecord {
    Eigen::VectorXd v_tilde;      ///< length N, notional traded
    Eigen::VectorXd r_bar;        ///< length N, realized shortfall returns
    Eigen::MatrixXd w_tilde;      ///< N x K dollar-weighted fund matrix
    Eigen::VectorXd dvol_hat;     ///< length N, forecast volumes, > 0
    Eigen::VectorXd sigma_hat;    ///< length N, forecast volatilities, > 0
    Eigen::VectorXd dvol_f_hat;   ///< length K, fund volume forecasts, > 0
    Eigen::VectorXd sigma_f_hat;  ///< length K, fund volatility forecasts, > 0
    Eigen::MatrixXd sigma_noise;  ///< N x N positive definite

    Index n_assets() const { return v_tilde.size(); }
    Index n_funds() const { return dvol_f_hat.size(); }

    void validate() const {
        const Index n = n_assets();
        const Index k = n_funds();
        if (n < 1) throw std::invalid_argument("TransactionRecord: empty trade vector");
        if (r_bar.size() != n || dvol_hat.size() != n || sigma_hat.size() != n) {
            throw std::invalid_argument("TransactionRecord: asset vector length mismatch");
        }
        if (w_tilde.rows() != n || w_tilde.cols() != k || sigma_f_hat.size() != k) {
            throw std::invalid_argument("TransactionRecord: fund dimension mismatch");
        }
        if ((dvol_hat.array() <= 0.0).any() || (sigma_hat.array() <= 0.0).any() ||
            (dvol_f_hat.array() <= 0.0).any() || (sigma_f_hat.array() <= 0.0).any()) {
            throw std::invalid_argument("TransactionRecord: forecasts must be strictly positive");
        }
        if (sigma_noise.rows() != n || sigma_noise.cols() != n) {
            throw std::invalid_argument("TransactionRecord: noise covariance dimension mismatch");
        }
        if (!sigma_noise.isApprox(sigma_noise.transpose(), 1e-12)) {
            throw std::invalid_argument("TransactionRecord: noise covariance not symmetric");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(sigma_noise);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument(
                "TransactionRecord: noise covariance not positive definite");
        }
    }
};

/// Expected shortfall returns 1/2 G_tilde^-1 v_tilde with
/// G_tilde = gamma_id D_id + W_tilde D_f W_tilde'. G_tilde has exactly the
/// diagonal-plus-low-rank liquidity structure, so the inverse goes through
/// the same K x K Woodbury route as the impact matrix.
inline Eigen::VectorXd predict_shortfall(const TransactionRecord& rec,
                                         const ImpactCoefficients& coef) {
    coef.validate();
    if (coef.n_funds() != rec.n_funds()) {
        throw std::invalid_argument("predict_shortfall: coefficient/fund count mismatch");
    }
    const Eigen::VectorXd psi_id = coef.gamma_id * rec.dvol_hat.cwiseQuotient(rec.sigma_hat);
    const Eigen::VectorXd psi_f =
        coef.gamma_f.cwiseProduct(rec.dvol_f_hat.cwiseQuotient(rec.sigma_f_hat));
    const auto g = ImpactMatrix<double>::build(psi_id, psi_f, rec.w_tilde);
    return 0.5 * g.apply(rec.v_tilde);
}

/// Gaussian log-likelihood (without the constant term):
///   -sum_r (r_bar - pred)' Sigma^-1 (r_bar - pred).
/// Record terms are accumulated with compensated summation so the value is
/// independent of how a parallel reduction would chunk the records.
inline double log_likelihood(const std::vector<TransactionRecord>& records,
                             const ImpactCoefficients& coef) {
    if (records.empty()) throw std::invalid_argument("log_likelihood: no records");
    double sum = 0.0;
    double carry = 0.0;
    for (const auto& rec : records) {
        const Eigen::VectorXd residual = rec.r_bar - predict_shortfall(rec, coef);
        Eigen::LLT<Eigen::MatrixXd> llt(rec.sigma_noise);
        if (llt.info() != Eigen::Success) {
            throw std::runtime_error("log_likelihood: noise covariance factorization failed");
        }
        const double term = residual.dot(llt.solve(residual));
        const double y = term - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    return -sum;
}

struct MleOptions {
    Index max_iterations = 500;
    double gradient_tolerance = 1e-8;  ///< on the inf-norm of the log-space gradient
    double fd_step = 1e-5;             ///< central-difference step in log-space
};

struct MleResult {
    ImpactCoefficients coefficients;
    bool converged = false;
    Index iterations = 0;
    double gradient_norm = 0.0;
    double log_likelihood_value = 0.0;
};

namespace detail {

inline ImpactCoefficients coef_from_log(const Eigen::VectorXd& x, Index k) {
    ImpactCoefficients c;
    c.gamma_id = std::exp(x[0]);
    c.gamma_f = x.tail(k).array().exp();
    return c;
}

}  // namespace detail

/// Maximum-likelihood fit of (gamma_id, gamma_f). The search runs in
/// log-space, which enforces positivity without explicit constraints, and
/// uses BFGS with central-difference gradients; the problem has only K+1
/// dimensions, so numerical gradients are cheap and an analytic gradient
/// would buy little.
inline MleResult fit_mle(const std::vector<TransactionRecord>& records,
                         const ImpactCoefficients& init, const MleOptions& options = {}) {
    if (records.empty()) throw std::invalid_argument("fit_mle: no records");
    init.validate();
    const Index k = init.n_funds();
    const Index dim = k + 1;

    const auto objective = [&](const Eigen::VectorXd& x) {
        return -log_likelihood(records, detail::coef_from_log(x, k));
    };
    const auto gradient = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(dim);
        for (Index j = 0; j < dim; ++j) {
            Eigen::VectorXd hi = x;
            Eigen::VectorXd lo = x;
            hi[j] += options.fd_step;
            lo[j] -= options.fd_step;
            g[j] = (objective(hi) - objective(lo)) / (2.0 * options.fd_step);
        }
        return g;
    };

    Eigen::VectorXd x(dim);
    x[0] = std::log(init.gamma_id);
    x.tail(k) = init.gamma_f.array().log();

    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);
    double f = objective(x);
    Eigen::VectorXd g = gradient(x);

    MleResult result;
    for (Index it = 0; it < options.max_iterations; ++it) {
        result.iterations = it;
        result.gradient_norm = g.lpNorm<Eigen::Infinity>();
        if (result.gradient_norm <= options.gradient_tolerance * std::max(1.0, std::abs(f))) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd direction = -(h_inv * g);
        if (direction.dot(g) >= 0.0) {
            h_inv.setIdentity();  // curvature update went bad; restart steepest descent
            direction = -g;
        }
        // Armijo backtracking.
        double step = 1.0;
        const double slope = direction.dot(g);
        double f_new = f;
        Eigen::VectorXd x_new = x;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * direction;
            f_new = objective(x_new);
            if (f_new <= f + 1e-4 * step * slope) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;  // line search stalled; gradient_norm reports the state

        const Eigen::VectorXd g_new = gradient(x_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
            const Eigen::MatrixXd left = eye - s * yv.transpose() / sy;
            h_inv = left * h_inv * left.transpose() + s * s.transpose() / sy;
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    result.coefficients = detail::coef_from_log(x, k);
    result.log_likelihood_value = -f;
    if (!result.converged) {
        result.gradient_norm = g.lpNorm<Eigen::Infinity>();
    }
    return result;
}

struct RecordSimOptions {
    Index n_assets = 5;
    double trade_participation = 0.1;  ///< trade scale as a fraction of forecast volume
    double noise_base = 1e-3;          ///< baseline shortfall-noise standard deviation
};

/// Synthetic transaction records drawn from the reduced-form model itself:
/// random positive forecasts, random fund weights, random trades, and
/// r_bar = prediction + noise_scale * N(0, Sigma). Record r uses the
/// sub-stream (seed, r), so the set is reproducible record by record.
inline std::vector<TransactionRecord> simulate_records(const ImpactCoefficients& true_coef,
                                                       Index n_records, Index n_assets,
                                                       double noise_scale, std::uint64_t seed,
                                                       const RecordSimOptions& options = {}) {
    true_coef.validate();
    if (n_records < 1) throw std::invalid_argument("simulate_records: need records");
    if (n_assets < 1) throw std::invalid_argument("simulate_records: need assets");
    if (!(noise_scale >= 0.0)) {
        throw std::invalid_argument("simulate_records: noise_scale must be >= 0");
    }
    const Index k = true_coef.n_funds();
    if (k > n_assets) throw std::invalid_argument("simulate_records: more funds than assets");

    std::vector<TransactionRecord> records;
    records.reserve(static_cast<std::size_t>(n_records));
    for (Index r = 0; r < n_records; ++r) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
        TransactionRecord rec;
        rec.dvol_hat.resize(n_assets);
        rec.sigma_hat.resize(n_assets);
        rec.v_tilde.resize(n_assets);
        for (Index i = 0; i < n_assets; ++i) {
            rec.dvol_hat[i] = std::exp(rng.uniform(std::log(1.0), std::log(10.0)));
            rec.sigma_hat[i] = rng.uniform(0.05, 0.2);
        }
        rec.w_tilde.resize(n_assets, k);
        rec.dvol_f_hat.resize(k);
        rec.sigma_f_hat.resize(k);
        for (Index j = 0; j < k; ++j) {
            for (Index i = 0; i < n_assets; ++i) rec.w_tilde(i, j) = rng.uniform(0.2, 1.0);
            rec.dvol_f_hat[j] = rng.uniform(2.0, 20.0);
            rec.sigma_f_hat[j] = rng.uniform(0.05, 0.2);
        }
        for (Index i = 0; i < n_assets; ++i) {
            rec.v_tilde[i] =
                options.trade_participation * rec.dvol_hat[i] * sample_normal(rng);
        }
        // Noise covariance: diagonally dominant SPD at the noise_base scale.
        Eigen::MatrixXd b(n_assets, n_assets);
        for (Index i = 0; i < n_assets; ++i) {
            for (Index j = 0; j < n_assets; ++j) b(i, j) = sample_normal(rng);
        }
        rec.sigma_noise = options.noise_base * options.noise_base *
                          (Eigen::MatrixXd::Identity(n_assets, n_assets) +
                           0.5 / static_cast<double>(n_assets) * (b * b.transpose()));

        rec.r_bar = predict_shortfall(rec, true_coef);
        if (noise_scale > 0.0) {
            Eigen::VectorXd z(n_assets);
            for (Index i = 0; i < n_assets; ++i) z[i] = sample_normal(rng);
            const Eigen::LLT<Eigen::MatrixXd> llt(rec.sigma_noise);
            rec.r_bar += noise_scale * (llt.matrixL() * z).eval();
        }
        rec.validate();
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace crossimpact
