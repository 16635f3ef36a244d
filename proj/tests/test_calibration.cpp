#include <doctest.h>

#include <cmath>

#include "crossimpact/calibration.hpp"
#include "crossimpact/orderflow.hpp"
#include "test_support.hpp"

using namespace crossimpact;
using testsupport::random_profile;

TEST_CASE("forward profiles: boundary mixtures and hand fixture") {
    MixtureProfileXd profile;
    profile.alpha = Eigen::Vector2d(0.5, 0.5);
    profile.beta = Eigen::Vector2d(0.0, 1.0);

    SUBCASE("no fund flow: volume follows alpha, correlation vanishes") {
        profile.theta = 0.0;
        const auto market = forward_profiles(profile);
        CHECK((market.avg_vol_alloc - profile.alpha).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(market.avg_correl.lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("pure fund flow: volume follows beta, correlation saturates") {
        profile.theta = 1.0;
        const auto market = forward_profiles(profile);
        CHECK((market.avg_vol_alloc - profile.beta).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(market.avg_correl[1] == 1.0);
        CHECK(market.avg_correl[0] == 0.0);  // no flow at all in period 1
    }
    SUBCASE("balanced mixture") {
        profile.theta = 0.5;
        const auto market = forward_profiles(profile);
        CHECK(std::abs(market.avg_vol_alloc[0] - 0.25) < 1e-15);
        CHECK(std::abs(market.avg_vol_alloc[1] - 0.75) < 1e-15);
        CHECK(market.avg_correl[0] == 0.0);
        CHECK(std::abs(market.avg_correl[1] - 2.0 / 3.0) < 1e-15);
    }
}

TEST_CASE("forward profiles: ranges and monotonicity in theta") {
    Rng rng(60);
    for (int trial = 0; trial < 30; ++trial) {
        const auto profile = random_profile(rng, 4);
        const auto market = forward_profiles(profile);
        CHECK(std::abs(market.avg_vol_alloc.sum() - 1.0) < 1e-12);
        CHECK((market.avg_correl.array() >= 0.0).all());
        CHECK((market.avg_correl.array() < 1.0).all());
    }
    // For beta_t > alpha_t the implied correlation grows with theta.
    MixtureProfileXd profile;
    profile.alpha = Eigen::Vector2d(0.7, 0.3);
    profile.beta = Eigen::Vector2d(0.3, 0.7);
    double previous = -1.0;
    for (double theta = 0.05; theta < 0.99; theta += 0.05) {
        profile.theta = theta;
        const double c = forward_profiles(profile).avg_correl[1];
        CHECK(c > previous);
        previous = c;
    }
}

TEST_CASE("calibrate: inverts the forward map on the hand fixture") {
    MarketProfiles observed;
    observed.avg_vol_alloc = Eigen::Vector2d(0.25, 0.75);
    observed.avg_correl = Eigen::Vector2d(0.0, 2.0 / 3.0);
    const auto result = calibrate(observed);
    CHECK(result.model_consistent);
    CHECK(std::abs(result.profile.theta - 0.5) < 1e-8);
    CHECK(std::abs(result.profile.alpha[0] - 0.5) < 1e-8);
    CHECK(std::abs(result.profile.alpha[1] - 0.5) < 1e-8);
    CHECK(std::abs(result.profile.beta[0]) < 1e-8);
    CHECK(std::abs(result.profile.beta[1] - 1.0) < 1e-8);
}

TEST_CASE("calibrate: round-trips random mixtures") {
    Rng rng(90210);
    for (int trial = 0; trial < 100; ++trial) {
        const auto truth = random_profile(rng, 2 + trial % 6, 0.05, 0.9);
        const auto result = calibrate(forward_profiles(truth));
        CHECK(result.model_consistent);
        CHECK(std::abs(result.profile.theta - truth.theta) < 1e-8);
        CHECK((result.profile.alpha - truth.alpha).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK((result.profile.beta - truth.beta).lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("calibrate: diagnostics and error paths") {
    SUBCASE("negative correlations are clipped and counted") {
        MixtureProfileXd truth;
        truth.theta = 0.4;
        truth.alpha = Eigen::Vector2d(0.6, 0.4);
        truth.beta = Eigen::Vector2d(0.2, 0.8);
        MarketProfiles observed = forward_profiles(truth);
        observed.avg_correl[0] = -1e-4;
        const auto result = calibrate(observed);
        CHECK(result.clipped_negative == 1);
    }
    SUBCASE("perfect correlation is rejected") {
        MarketProfiles observed;
        observed.avg_vol_alloc = Eigen::Vector2d(0.5, 0.5);
        observed.avg_correl = Eigen::Vector2d(0.2, 1.0);
        CHECK_THROWS_AS(calibrate(observed), std::invalid_argument);
    }
    SUBCASE("model-inconsistent data is flagged, not fatal") {
        MarketProfiles observed;
        observed.avg_vol_alloc = Eigen::Vector3d(0.6, 0.3, 0.1);
        observed.avg_correl = Eigen::Vector3d(0.9, 0.05, 0.9);
        const auto result = calibrate(observed);
        CHECK(!result.model_consistent);
        CHECK(result.residual > 1e-6);
    }
    SUBCASE("single period is rejected") {
        MarketProfiles observed;
        observed.avg_vol_alloc = Eigen::VectorXd::Constant(1, 1.0);
        observed.avg_correl = Eigen::VectorXd::Constant(1, 0.5);
        CHECK_THROWS_AS(calibrate(observed), std::invalid_argument);
    }
}

TEST_CASE("compute profiles: degenerate panels") {
    SUBCASE("constant volumes have no correlation to measure") {
        VolumePanel panel;
        panel.days = 3;
        panel.periods = 2;
        panel.assets = 2;
        panel.dvol = Eigen::MatrixXd::Constant(6, 2, 5.0);
        const auto profiles = compute_profiles(panel);
        CHECK(profiles.excluded_pairs == 2);  // one pair per period
        CHECK(!profiles.avg_correl[0].has_value());
        CHECK(!profiles.avg_correl[1].has_value());
        CHECK_THROWS_AS(profiles.to_market_profiles(), std::runtime_error);
        // Volume allocations are still well-defined.
        CHECK(std::abs(profiles.avg_vol_alloc[0] - 0.5) < 1e-15);
    }
    SUBCASE("proportional assets are perfectly correlated") {
        VolumePanel panel;
        panel.days = 4;
        panel.periods = 2;
        panel.assets = 2;
        panel.dvol.resize(8, 2);
        Rng rng(1);
        for (Index d = 0; d < 4; ++d) {
            for (Index t = 0; t < 2; ++t) {
                const double base = rng.uniform(1.0, 3.0);
                panel.at(d, t, 0) = base;
                panel.at(d, t, 1) = 2.0 * base;
            }
        }
        const auto profiles = compute_profiles(panel);
        CHECK(std::abs(*profiles.avg_correl[0] - 1.0) < 1e-12);
        CHECK(std::abs(*profiles.avg_correl[1] - 1.0) < 1e-12);
    }
    SUBCASE("one day is not enough") {
        VolumePanel panel;
        panel.days = 1;
        panel.periods = 2;
        panel.assets = 2;
        panel.dvol = Eigen::MatrixXd::Constant(2, 2, 1.0);
        CHECK_THROWS_AS(compute_profiles(panel), std::invalid_argument);
    }
    SUBCASE("an asset that never trades is rejected") {
        VolumePanel panel;
        panel.days = 3;
        panel.periods = 2;
        panel.assets = 2;
        panel.dvol = Eigen::MatrixXd::Constant(6, 2, 1.0);
        panel.dvol.col(1).setZero();
        CHECK_THROWS_AS(compute_profiles(panel), std::invalid_argument);
    }
}

TEST_CASE("compute profiles: simulated panel converges to the theoretical profiles") {
    // Homogeneous theta: per-asset fund share identical by construction.
    OrderFlowParams params;
    params.lambda = 30.0;
    params.cv = 0.5;
    params.qbar_id = Eigen::Vector3d(1.0, 2.0, 0.5);
    params.qbar_f = 2.0;
    const double theta = 0.4;
    // w_tilde chosen so theta_i = theta for every asset.
    params.w_tilde = theta / (1.0 - theta) / params.qbar_f * params.qbar_id;
    params.alpha = Eigen::Vector2d(0.6, 0.4);
    params.beta = Eigen::Vector2d(0.2, 0.8);

    MixtureProfileXd mixture;
    mixture.theta = theta;
    mixture.alpha = params.alpha;
    mixture.beta = params.beta;
    const MarketProfiles expected = forward_profiles(mixture);

    const auto panel = simulate_panel(params, 20000, 777);
    const auto profiles = compute_profiles(panel);
    const auto market = profiles.to_market_profiles();
    for (Index t = 0; t < 2; ++t) {
        CHECK(std::abs(market.avg_correl[t] - expected.avg_correl[t]) < 0.01);
        CHECK(std::abs(market.avg_vol_alloc[t] - expected.avg_vol_alloc[t]) < 0.01);
    }
}
