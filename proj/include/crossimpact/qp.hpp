#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "crossimpact/impact.hpp"
#include "crossimpact/schedule.hpp"
#include "crossimpact/types.hpp"

namespace crossimpact {

struct QpOptions {
    Index max_iterations = 100000;
    double tolerance = 1e-10;  ///< on the (scaled) KKT / gradient-mapping residual
};

template <typename Scalar>
struct QpResult {
    Schedule<Scalar> schedule;
    bool converged = false;
    Index iterations = 0;
    Scalar residual = Scalar(0);
    Scalar cost = Scalar(0);
};

namespace detail {

/// Euclidean projection of y onto the simplex {u : sum u = s, u >= 0}, s >= 0.
template <typename Scalar>
VectorX<Scalar> project_simplex(const VectorX<Scalar>& y, Scalar s) {
    const Index n = y.size();
    std::vector<Scalar> sorted(y.data(), y.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());
    Scalar running = Scalar(0);
    Scalar tau = (y.sum() - s) / Scalar(n);
    for (Index j = 0; j < n; ++j) {
        running += sorted[j];
        const Scalar candidate = (running - s) / Scalar(j + 1);
        if (j + 1 == n || sorted[j + 1] <= candidate) {
            tau = candidate;
            break;
        }
    }
    return (y.array() - tau).max(Scalar(0)).matrix();
}

}  // namespace detail

/// Numerical oracle for the coupled execution problem:
///   minimize sum_t 1/2 v_t' G_t v_t   s.t.   sum_t v_t = x0,
/// optionally with per-scalar side constraints sign(v_it) = sign(x0_i)
/// (and v_it = 0 where x0_i = 0). Projected gradient on the constraint
/// set with an exact line search; the objective is a strictly convex
/// quadratic (every G_t is positive definite by construction, which also
/// guarantees a unique solution), so the iteration is globally convergent.
/// Deliberately independent of the closed-form schedule so the two can
/// validate each other.
template <typename Scalar>
QpResult<Scalar> qp_oracle(const IntradayLiquidity<Scalar>& liq,
                           const NonDeduced<VectorRef<Scalar>>& x0,
                           bool sign_constrained, const QpOptions& options = {}) {
    liq.validate();
    const Index t_count = liq.periods();
    const Index n = liq.n_assets();
    if (x0.size() != n) throw std::invalid_argument("qp_oracle: x0 length mismatch");

    QpResult<Scalar> result;
    result.schedule.x0 = x0;
    result.schedule.v = MatrixX<Scalar>::Zero(t_count, n);
    if (x0.isZero(Scalar(0))) {
        result.converged = true;
        return result;
    }

    // Dense per-period impact matrices; the oracle is meant for validation
    // at modest sizes.
    std::vector<MatrixX<Scalar>> g(t_count);
    Scalar lipschitz = Scalar(0);
    for (Index t = 0; t < t_count; ++t) {
        if (!((liq.psi_id.row(t).array() > Scalar(0)).all())) {
            throw std::invalid_argument(
                "qp_oracle: period " + std::to_string(t) +
                " has zero single-stock liquidity; the objective is not finite-valued");
        }
        ImpactOptions opts;
        opts.drop_zero_fund_liquidity = true;
        const auto imp = ImpactMatrix<Scalar>::build(liq.psi_id.row(t).transpose(),
                                                     liq.psi_f.row(t).transpose(), liq.W, opts);
        g[t] = imp.dense();
        Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(g[t]);
        if (!(es.eigenvalues().minCoeff() > Scalar(0))) {
            throw std::runtime_error("qp_oracle: period impact matrix not positive definite");
        }
        lipschitz = std::max(lipschitz, es.eigenvalues().maxCoeff());
    }

    MatrixX<Scalar>& v = result.schedule.v;
    // Feasible start: uniform split (and its sign-feasible equivalent).
    for (Index t = 0; t < t_count; ++t) v.row(t) = x0.transpose() / Scalar(t_count);

    const auto gradient = [&](const MatrixX<Scalar>& points) {
        MatrixX<Scalar> grad(t_count, n);
        for (Index t = 0; t < t_count; ++t) {
            grad.row(t) = (g[t] * points.row(t).transpose()).transpose();
        }
        return grad;
    };
    const auto curvature = [&](const MatrixX<Scalar>& dir) {
        Scalar q = Scalar(0);
        for (Index t = 0; t < t_count; ++t) {
            q += dir.row(t).dot((g[t] * dir.row(t).transpose()).transpose());
        }
        return q;
    };

    const Scalar grad_scale = Scalar(1);
    const Scalar tol = Scalar(options.tolerance);

    if (!sign_constrained) {
        for (Index it = 0; it < options.max_iterations; ++it) {
            const MatrixX<Scalar> grad = gradient(v);
            const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean_row = grad.colwise().mean();
            MatrixX<Scalar> dir = -(grad.rowwise() - mean_row);
            const Scalar res =
                dir.template lpNorm<Eigen::Infinity>() /
                std::max(grad_scale, mean_row.template lpNorm<Eigen::Infinity>());
            result.iterations = it;
            result.residual = res;
            if (res <= tol) {
                result.converged = true;
                break;
            }
            const Scalar denom = curvature(dir);
            if (!(denom > Scalar(0))) {
                result.converged = true;  // direction numerically zero
                break;
            }
            const Scalar step = dir.squaredNorm() / denom;
            v += step * dir;
        }
    } else {
        const Scalar step = Scalar(1) / lipschitz;
        const auto project = [&](const MatrixX<Scalar>& points) {
            MatrixX<Scalar> proj(t_count, n);
            for (Index i = 0; i < n; ++i) {
                if (x0[i] > Scalar(0)) {
                    proj.col(i) = detail::project_simplex<Scalar>(points.col(i), x0[i]);
                } else if (x0[i] < Scalar(0)) {
                    proj.col(i) = -detail::project_simplex<Scalar>(-points.col(i), -x0[i]);
                } else {
                    proj.col(i).setZero();
                }
            }
            return proj;
        };
        v = project(v);
        for (Index it = 0; it < options.max_iterations; ++it) {
            const MatrixX<Scalar> grad = gradient(v);
            const MatrixX<Scalar> target = project(v - step * grad);
            MatrixX<Scalar> dir = target - v;
            const Scalar res = dir.template lpNorm<Eigen::Infinity>() / step /
                               std::max(grad_scale, grad.template lpNorm<Eigen::Infinity>());
            result.iterations = it;
            result.residual = res;
            if (res <= tol) {
                result.converged = true;
                break;
            }
            // Exact line search along the feasible segment [v, target].
            const Scalar denom = curvature(dir);
            Scalar tau = Scalar(1);
            if (denom > Scalar(0)) {
                tau = std::clamp(-(dir.array() * grad.array()).sum() / denom, Scalar(0),
                                 Scalar(1));
                if (tau == Scalar(0)) tau = Scalar(1);  // always make the PGD step
            }
            v += tau * dir;
        }
    }

    Scalar cost = Scalar(0);
    for (Index t = 0; t < t_count; ++t) {
        cost += Scalar(0.5) * v.row(t).dot((g[t] * v.row(t).transpose()).transpose());
    }
    result.cost = cost;
    return result;
}

}  // namespace crossimpact
