#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace crossimpact {

/// SplitMix64 step; used for seeding and for deriving sub-streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ generator. Sub-streams are derived from a (seed, index)
/// pair by a counter-based hash, so stream k of a given seed is the same
/// regardless of how many other streams were drawn before it. This makes
/// per-day / per-record simulation independent of scheduling order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        std::uint64_t mix = a ^ (index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
        Rng rng(0);
        rng.reseed_raw(mix);
        return rng;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform01_open_left() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  private:
    void reseed(std::uint64_t seed) { reseed_raw(seed); }

    void reseed_raw(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
        // xoshiro state must not be all zero; splitmix64 never maps a
        // sequence of four outputs to all zeros, but keep the guard cheap.
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_;
};

/// Standard normal via Box-Muller. Stateless: draws two uniforms per call.
inline double sample_normal(Rng& rng) {
    const double u1 = rng.uniform01_open_left();
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Poisson sampler: exact CDF inversion for small means, Hormann's PTRS
/// transformed-rejection for large means. Covers the whole intensity range
/// without the accuracy loss of a normal approximation.
inline std::int64_t sample_poisson(Rng& rng, double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("sample_poisson: mean must be >= 0");
    if (mean == 0.0) return 0;

    if (mean <= 10.0) {
        // Sequential inversion of the CDF.
        double p = std::exp(-mean);
        double cdf = p;
        const double u = rng.uniform01();
        std::int64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (k > 2000) break;  // numerically unreachable for mean <= 10
        }
        return k;
    }

    // PTRS (Hormann 1993).
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);

    for (;;) {
        const double u = rng.uniform01() - 0.5;
        const double v = rng.uniform01_open_left();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mean - mean - std::lgamma(k + 1.0)) {
            return static_cast<std::int64_t>(kf);
        }
    }
}

namespace detail {

/// Marsaglia-Tsang for shape >= 1 (scale 1).
inline double gamma_shape_ge1(Rng& rng, double shape) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = sample_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform01_open_left();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

}  // namespace detail

/// Gamma draw parameterized by mean and coefficient of variation:
/// shape = 1/cv^2, scale = mean*cv^2, so both requested moments are exact.
/// cv == 0 degenerates to the constant `mean`.
inline double sample_gamma_mean_cv(Rng& rng, double mean, double cv) {
    if (!(mean > 0.0)) throw std::invalid_argument("sample_gamma_mean_cv: mean must be > 0");
    if (!(cv >= 0.0)) throw std::invalid_argument("sample_gamma_mean_cv: cv must be >= 0");
    if (cv == 0.0) return mean;
    const double shape = 1.0 / (cv * cv);
    const double scale = mean * cv * cv;
    if (shape >= 1.0) return scale * detail::gamma_shape_ge1(rng, shape);
    // Boost for shape < 1: gamma(s) = gamma(s+1) * U^(1/s).
    const double g = detail::gamma_shape_ge1(rng, shape + 1.0);
    const double u = rng.uniform01_open_left();
    return scale * g * std::pow(u, 1.0 / shape);
}

}  // namespace crossimpact
