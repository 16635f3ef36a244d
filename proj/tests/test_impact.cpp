#include <doctest.h>

#include <cmath>

#include "crossimpact/impact.hpp"
#include "test_support.hpp"

using namespace crossimpact;
using testsupport::dense_inverse_oracle;
using testsupport::dense_total_liquidity;
using testsupport::random_model;
using testsupport::random_vector;

namespace {

LiquidityModelXd coupled_fixture() {
    // N = 2, K = 1, psi_id = (1, 1), psi_f = (1), w1 = (1, 1)'.
    LiquidityModelXd model;
    model.psi_id = Eigen::Vector2d(1.0, 1.0);
    model.psi_f = Eigen::VectorXd::Constant(1, 1.0);
    model.W = Eigen::MatrixXd::Constant(2, 1, 1.0);
    return model;
}

LiquidityModelXd diagonal_fixture() {
    LiquidityModelXd model;
    model.psi_id = Eigen::Vector2d(2.0, 4.0);
    model.psi_f.resize(0);
    model.W.resize(2, 0);
    return model;
}

}  // namespace

TEST_CASE("impact matrix: diagonal model inverts elementwise") {
    const auto g = build_impact_matrix(diagonal_fixture());
    CHECK(g.dense()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g.dense()(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.dense()(0, 1) == 0.0);
    CHECK(g.dense()(1, 0) == 0.0);
}

TEST_CASE("impact matrix: single-fund fixture matches the dense 2x2 inverse") {
    const auto model = coupled_fixture();
    const auto g = build_impact_matrix(model);
    CHECK(std::abs(g.dense()(0, 0) - 2.0 / 3.0) < 1e-14);
    CHECK(std::abs(g.dense()(0, 1) + 1.0 / 3.0) < 1e-14);
    CHECK(std::abs(g.dense()(1, 0) + 1.0 / 3.0) < 1e-14);
    CHECK(std::abs(g.dense()(1, 1) - 2.0 / 3.0) < 1e-14);
    const Eigen::MatrixXd oracle = dense_inverse_oracle(model);
    CHECK((g.dense() - oracle).norm() < 1e-14);
}

TEST_CASE("impact matrix: random N=6 K=2 instance matches dense inversion") {
    Rng rng(001234);
    const auto model = random_model(rng, 6, 2);
    const auto g = build_impact_matrix(model);
    const Eigen::MatrixXd oracle = dense_inverse_oracle(model);
    CHECK((g.dense() - oracle).norm() / oracle.norm() < 1e-10);
    // G (Psi_id + W Psi_f W') = I within 1e-10.
    const Eigen::MatrixXd product = g.dense() * dense_total_liquidity(model);
    CHECK((product - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-10);
}

TEST_CASE("impact matrix: Woodbury equals dense inversion across random models") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 1 + static_cast<Index>(rng.uniform(0.0, 12.0));
        const Index k = static_cast<Index>(rng.uniform(0.0, 5.0)) % (n + 1);
        const auto model = random_model(rng, n, std::min<Index>(k, 4));
        const auto g = build_impact_matrix(model);
        const Eigen::MatrixXd oracle = dense_inverse_oracle(model);
        CHECK((g.dense() - oracle).norm() / oracle.norm() < 1e-9);
        // Positive definiteness through the quadratic form.
        for (int probe = 0; probe < 100; ++probe) {
            const Eigen::VectorXd v = random_vector(rng, n);
            if (v.norm() == 0.0) continue;
            CHECK(g.quadratic_form(v) > 0.0);
        }
    }
}

TEST_CASE("impact matrix: matvec and quadratic form agree with the dense form") {
    Rng rng(7);
    const auto model = random_model(rng, 9, 3);
    const auto g = build_impact_matrix(model);
    for (int probe = 0; probe < 20; ++probe) {
        const Eigen::VectorXd v = random_vector(rng, 9);
        CHECK((g.apply(v) - g.dense() * v).norm() < 1e-12);
        CHECK(std::abs(g.quadratic_form(v) - v.dot(g.dense() * v)) < 1e-12);
        CHECK((g.solve(g.apply(v)) - v).norm() < 1e-10 * std::max(1.0, v.norm()));
    }
}

TEST_CASE("impact matrix: invalid models are rejected") {
    LiquidityModelXd bad = coupled_fixture();
    bad.psi_id[0] = 0.0;
    CHECK_THROWS_AS(build_impact_matrix(bad), std::invalid_argument);

    bad = coupled_fixture();
    bad.psi_f[0] = -1.0;
    CHECK_THROWS_AS(build_impact_matrix(bad), std::invalid_argument);

    bad = coupled_fixture();
    bad.W.resize(1, 1);
    CHECK_THROWS_AS(build_impact_matrix(bad), std::invalid_argument);

    // Duplicated fund weights make the capacitance matrix singular.
    LiquidityModelXd dependent;
    dependent.psi_id = Eigen::Vector3d(1.0, 1.0, 1.0);
    dependent.psi_f = Eigen::Vector2d(1.0, 1.0);
    dependent.W.resize(3, 2);
    dependent.W.col(0) = Eigen::Vector3d(1.0, 2.0, 3.0);
    dependent.W.col(1) = Eigen::Vector3d(1.0, 2.0, 3.0);
    CHECK_THROWS_AS(build_impact_matrix(dependent), std::invalid_argument);
}

TEST_CASE("price impact: spec cases and clearing decomposition") {
    SUBCASE("zero trade moves nothing") {
        const Eigen::VectorXd dp = price_impact(coupled_fixture(), Eigen::Vector2d(0.0, 0.0));
        CHECK(dp.norm() == 0.0);
    }
    SUBCASE("diagonal case") {
        const Eigen::VectorXd dp = price_impact(diagonal_fixture(), Eigen::Vector2d(1.0, 1.0));
        CHECK(dp(0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(dp(1) == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("fixture trade splits between investor classes") {
        const auto split = clearing_decomposition(coupled_fixture(), Eigen::Vector2d(1.0, 0.0));
        CHECK(std::abs(split.price_change(0) - 2.0 / 3.0) < 1e-14);
        CHECK(std::abs(split.price_change(1) + 1.0 / 3.0) < 1e-14);
        const Eigen::VectorXd back = split.single_stock_shares + split.fund_shares;
        CHECK((back - Eigen::Vector2d(1.0, 0.0)).lpNorm<Eigen::Infinity>() < 1e-10);
    }
    SUBCASE("decomposition sums to the trade on random models") {
        Rng rng(99);
        for (int trial = 0; trial < 25; ++trial) {
            const auto model = random_model(rng, 7, 3);
            const Eigen::VectorXd v = random_vector(rng, 7);
            const auto split = clearing_decomposition(model, v);
            CHECK((split.single_stock_shares + split.fund_shares - v).lpNorm<Eigen::Infinity>() <
                  1e-10);
        }
    }
}

TEST_CASE("one-period cost: spec cases") {
    CHECK(one_period_cost(coupled_fixture(), Eigen::Vector2d(0.0, 0.0)) == 0.0);
    CHECK(std::abs(one_period_cost(diagonal_fixture(), Eigen::Vector2d(2.0, 2.0)) - 1.5) < 1e-14);
    CHECK(std::abs(one_period_cost(coupled_fixture(), Eigen::Vector2d(1.0, 1.0)) - 1.0 / 3.0) <
          1e-14);
}

TEST_CASE("one-period cost: scaling all liquidity by c scales cost by 1/c") {
    Rng rng(5);
    const auto model = random_model(rng, 5, 2);
    const Eigen::VectorXd v = random_vector(rng, 5);
    const double base = one_period_cost(model, v);
    // Powers of two with exact square roots keep every operation lossless.
    CHECK(one_period_cost(model.scaled(4.0, 4.0), v) == base / 4.0);
    CHECK(one_period_cost(model.scaled(16.0, 16.0), v) == base / 16.0);
    const double scaled3 = one_period_cost(model.scaled(3.0, 3.0), v);
    CHECK(std::abs(scaled3 - base / 3.0) < 1e-14 * std::abs(base));
}

TEST_CASE("one-period cost: extreme-mixture limits recover the closed forms") {
    const auto model = coupled_fixture();
    SUBCASE("vanishing fund liquidity approaches the no-funds cost") {
        const Eigen::VectorXd v = Eigen::Vector2d(1.0, -0.3);
        const double limit = *extreme_case_cost(model, v, ExtremeCase::NoFunds);
        const double near = one_period_cost(model.scaled(1.0, 1e-8), v);
        CHECK(std::abs(near - limit) < 1e-6 * std::abs(limit));
    }
    SUBCASE("vanishing single-stock liquidity approaches the funds-only cost in span(W)") {
        const Eigen::VectorXd v = Eigen::Vector2d(2.0, 2.0);
        const double limit = *extreme_case_cost(model, v, ExtremeCase::FundsOnly);
        const double near = one_period_cost(model.scaled(1e-8, 1.0), v);
        CHECK(std::abs(near - limit) < 1e-6 * std::abs(limit));
    }
}

TEST_CASE("extreme-case cost: spec cases") {
    SUBCASE("no funds: diagonal quadratic") {
        const auto cost =
            extreme_case_cost(diagonal_fixture(), Eigen::Vector2d(1.0, 1.0), ExtremeCase::NoFunds);
        REQUIRE(cost.has_value());
        CHECK(std::abs(*cost - 0.375) < 1e-15);
    }
    SUBCASE("funds only: trade along the fund") {
        const auto cost =
            extreme_case_cost(coupled_fixture(), Eigen::Vector2d(2.0, 2.0), ExtremeCase::FundsOnly);
        REQUIRE(cost.has_value());
        CHECK(std::abs(*cost - 2.0) < 1e-14);
    }
    SUBCASE("funds only: off-span trade is infeasible") {
        const auto cost =
            extreme_case_cost(coupled_fixture(), Eigen::Vector2d(1.0, 0.0), ExtremeCase::FundsOnly);
        CHECK(!cost.has_value());
    }
    SUBCASE("zero trade costs nothing in both limits") {
        const auto cost =
            extreme_case_cost(coupled_fixture(), Eigen::Vector2d(0.0, 0.0), ExtremeCase::FundsOnly);
        REQUIRE(cost.has_value());
        CHECK(*cost == 0.0);
    }
}

TEST_CASE("notional units: rescaled model preserves execution cost") {
    SUBCASE("unit prices only renormalize the fund weights") {
        const auto model = coupled_fixture();
        PriceStateXd prices{Eigen::Vector2d(1.0, 1.0)};
        const auto notional = to_notional_units(model, prices);
        CHECK(notional.psi_id == model.psi_id);
        CHECK(notional.psi_f(0) == doctest::Approx(4.0).epsilon(1e-15));  // (w'p)^2 = 4
        CHECK((notional.W - model.W / 2.0).norm() < 1e-15);               // w / sum(w)
    }
    SUBCASE("fixture: share-unit and notional-unit costs coincide") {
        const auto model = coupled_fixture();
        PriceStateXd prices{Eigen::Vector2d(2.0, 1.0)};
        const auto notional = to_notional_units(model, prices);
        const Eigen::VectorXd v = Eigen::Vector2d(1.0, 1.0);
        const Eigen::VectorXd v_tilde = prices.p.cwiseProduct(v);
        const double share_cost = one_period_cost(model, v);
        const double notional_cost = one_period_cost(notional, v_tilde);
        CHECK(std::abs(share_cost - notional_cost) < 1e-10 * std::abs(share_cost));
    }
    SUBCASE("price scaling by c multiplies psi_id by c^2 and keeps cost identity") {
        Rng rng(11);
        const auto model = random_model(rng, 4, 2);
        const Eigen::VectorXd base_p = random_vector(rng, 4, 0.5, 3.0);
        const auto scaled = to_notional_units(model, PriceStateXd{2.0 * base_p});
        const auto plain = to_notional_units(model, PriceStateXd{base_p});
        CHECK((scaled.psi_id - 4.0 * plain.psi_id).lpNorm<Eigen::Infinity>() == 0.0);
        const Eigen::VectorXd v = random_vector(rng, 4);
        const double share_cost = one_period_cost(model, v);
        const double notional_cost =
            one_period_cost(scaled, (2.0 * base_p).cwiseProduct(v).eval());
        CHECK(std::abs(share_cost - notional_cost) < 1e-10 * std::abs(share_cost));
    }
    SUBCASE("degenerate fund pricing is rejected") {
        LiquidityModelXd model = coupled_fixture();
        model.W.col(0) = Eigen::Vector2d(1.0, -1.0);
        CHECK_THROWS_AS(to_notional_units(model, PriceStateXd{Eigen::Vector2d(1.0, 1.0)}),
                        std::invalid_argument);
    }
    SUBCASE("price-change/return identity on random models") {
        Rng rng(23);
        for (int trial = 0; trial < 20; ++trial) {
            const auto model = random_model(rng, 5, 2);
            const Eigen::VectorXd p = random_vector(rng, 5, 0.25, 4.0);
            const auto notional = to_notional_units(model, PriceStateXd{p});
            const Eigen::VectorXd v = random_vector(rng, 5);
            const double share_side = v.dot(price_impact(model, v));
            const Eigen::VectorXd v_tilde = p.cwiseProduct(v);
            const double notional_side = v_tilde.dot(price_impact(notional, v_tilde));
            CHECK(std::abs(share_side - notional_side) <
                  1e-10 * std::max(1.0, std::abs(share_side)));
        }
    }
}

TEST_CASE("total cost: zero, single-period, and degenerate-period fixtures") {
    SUBCASE("all-zero schedule costs nothing") {
        Rng rng(3);
        const auto liq = testsupport::random_horizon(rng, 3, 4, 1);
        const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 4);
        CHECK(*total_cost(liq, zeros) == 0.0);
    }
    SUBCASE("single period reduces to the one-period cost") {
        Rng rng(4);
        const auto model = random_model(rng, 4, 2);
        IntradayLiquidityXd liq;
        liq.psi_id = model.psi_id.transpose();
        liq.psi_f = model.psi_f.transpose();
        liq.W = model.W;
        const Eigen::VectorXd v = random_vector(rng, 4);
        const auto cost = total_cost(liq, v.transpose().eval());
        REQUIRE(cost.has_value());
        CHECK(std::abs(*cost - one_period_cost(model, v)) < 1e-12);
    }
    SUBCASE("degenerate two-period fixture: hand value 1/3") {
        // Period 1 all single-stock, period 2 all fund liquidity.
        IntradayLiquidityXd liq;
        liq.psi_id.resize(2, 2);
        liq.psi_id << 1.0, 1.0, 0.0, 0.0;
        liq.psi_f.resize(2, 1);
        liq.psi_f << 0.0, 1.0;
        liq.W = Eigen::MatrixXd::Constant(2, 1, 1.0);
        Eigen::MatrixXd trades(2, 2);
        trades << 2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
        const auto cost = total_cost(liq, trades);
        REQUIRE(cost.has_value());
        CHECK(std::abs(*cost - 1.0 / 3.0) < 1e-10);
        // Off-span trading in the funds-only period has infinite cost.
        trades.row(1) = Eigen::RowVector2d(1.0 / 3.0, 0.0);
        trades.row(0) = Eigen::RowVector2d(2.0 / 3.0, 0.0);
        CHECK(!total_cost(liq, trades).has_value());
    }
    SUBCASE("dimension mismatch is rejected") {
        Rng rng(6);
        const auto liq = testsupport::random_horizon(rng, 3, 4, 1);
        CHECK_THROWS_AS(total_cost(liq, Eigen::MatrixXd::Zero(2, 4)), std::invalid_argument);
    }
}
