#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "crossimpact/types.hpp"

namespace crossimpact {

/// Daily mixture of order flow: theta is the index-fund share of daily
/// volume; alpha and beta are the intraday intensity profiles of
/// single-stock and index-fund activity, each summing to one. Individual
/// periods may carry zero intensity; operations that divide by alpha_t or
/// beta_t check strict positivity themselves.
template <typename Scalar>
struct MixtureProfile {
    Scalar theta = Scalar(0);
    VectorX<Scalar> alpha;
    VectorX<Scalar> beta;

    Index periods() const { return alpha.size(); }

    void validate(Scalar sum_tolerance = Scalar(1e-12)) const {
        if (alpha.size() < 1 || alpha.size() != beta.size()) {
            throw std::invalid_argument("MixtureProfile: alpha/beta length mismatch");
        }
        if (!(theta >= Scalar(0)) || !(theta <= Scalar(1))) {
            throw std::invalid_argument("MixtureProfile: theta must lie in [0, 1]");
        }
        if ((alpha.array() < Scalar(0)).any() || (beta.array() < Scalar(0)).any()) {
            throw std::invalid_argument("MixtureProfile: negative intensity entry");
        }
        using std::abs;
        if (abs(alpha.sum() - Scalar(1)) > sum_tolerance) {
            throw std::invalid_argument("MixtureProfile: alpha must sum to 1, got " +
                                        std::to_string(static_cast<double>(alpha.sum())));
        }
        if (abs(beta.sum() - Scalar(1)) > sum_tolerance) {
            throw std::invalid_argument("MixtureProfile: beta must sum to 1, got " +
                                        std::to_string(static_cast<double>(beta.sum())));
        }
    }

    /// Total volume fraction trading in period t: alpha_t(1-theta) + beta_t theta.
    VectorX<Scalar> volume_allocation() const {
        return alpha * (Scalar(1) - theta) + beta * theta;
    }
};

using MixtureProfileXd = MixtureProfile<double>;

}  // namespace crossimpact
