#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "switchiv/aalen.hpp"
#include "switchiv/simtrial.hpp"

using namespace switchiv;
using testutil::mirrored_arms;
using testutil::subject;

TEST_SUITE_BEGIN("aalen");

TEST_CASE("mirrored arms give a zero score and a null fit") {
    auto d = mirrored_arms({1, 2, 3, 4, 5});
    auto grid = event_grid(d);
    auto sc = aalen_score(d, grid, Regressor::Arm, 0.0);
    CHECK(std::abs(sc.u.sum()) < 1e-12);

    auto fit = aalen_solve(d, grid, Regressor::Arm);
    CHECK(std::abs(fit.beta) < 1e-12);
    CHECK(fit.p_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.ci_lo < 0);
    CHECK(fit.ci_hi > 0);
    CHECK(fit.n == 10);
    CHECK(fit.n_events == 10);
}

TEST_CASE("single-arm data is a degenerate regressor") {
    Dataset d;
    d.subjects = {subject("a", 0, 1, true), subject("b", 0, 2, true)};
    auto grid = event_grid(d);
    CHECK_THROWS_WITH_AS(aalen_solve(d, grid, Regressor::Arm),
                         doctest::Contains("degenerate regressor"), Error);
}

TEST_CASE("scores are linear in the weights, the root is scale invariant") {
    auto sim = generate(testutil::small_confounded(150, 1e-4, 11));
    auto d = sim.data;
    auto grid = event_grid(d);
    WeightFn w3 = [](size_t, double) { return 3.5; };
    auto s1 = aalen_score(d, grid, Regressor::Arm, 2e-4);
    auto s3 = aalen_score(d, grid, Regressor::Arm, 2e-4, w3);
    for (Eigen::Index i = 0; i < s1.u.size(); ++i)
        CHECK(s3.u[i] == doctest::Approx(3.5 * s1.u[i]).epsilon(1e-12));

    auto f1 = aalen_solve(d, grid, Regressor::Arm, {}, 0.05, false);
    auto f3 = aalen_solve(d, grid, Regressor::Arm, w3, 0.05, false);
    CHECK(f1.beta == doctest::Approx(f3.beta).epsilon(1e-12));
}

TEST_CASE("score is affine in beta") {
    auto sim = generate(testutil::small_confounded(120, 1e-4, 5));
    auto grid = event_grid(sim.data);
    auto s0 = aalen_score(sim.data, grid, Regressor::Arm, 0.0);
    auto s1 = aalen_score(sim.data, grid, Regressor::Arm, 1e-3);
    auto s2 = aalen_score(sim.data, grid, Regressor::Arm, 4e-4);
    for (Eigen::Index i = 0; i < s0.u.size(); ++i) {
        double interpolated = s0.u[i] + (s1.u[i] - s0.u[i]) * (4e-4 / 1e-3);
        CHECK(s2.u[i] == doctest::Approx(interpolated).epsilon(1e-9));
    }
    // the analytic derivative matches the slope
    for (Eigen::Index i = 0; i < s0.u.size(); ++i)
        CHECK(s0.udot[i] == doctest::Approx((s1.u[i] - s0.u[i]) / 1e-3).epsilon(1e-9));
}

TEST_CASE("the fitted beta solves the score equation") {
    auto sim = generate(testutil::small_confounded(300, 2e-4, 42));
    auto grid = event_grid(sim.data);
    auto fit = aalen_solve(sim.data, grid, Regressor::Arm, {}, 0.05, false);
    auto sc = aalen_score(sim.data, grid, Regressor::Arm, fit.beta);
    double scale = sc.u.cwiseAbs().maxCoeff();
    CHECK(std::abs(sc.u.sum()) <= 1e-10 * std::max(1.0, scale * sim.data.subjects.size()));
}

TEST_CASE("as-treated equals arm regressor without crossover") {
    auto cfg = testutil::small_confounded(200, 2e-4, 9);
    cfg.switch_rule = SwitchRule::Never;
    auto sim = generate(cfg);
    auto grid = event_grid(sim.data);
    auto fz = aalen_solve(sim.data, grid, Regressor::Arm, {}, 0.05, false);
    auto fd = aalen_solve(sim.data, grid, Regressor::AsTreated, {}, 0.05, false);
    CHECK(fz.beta == fd.beta);
    CHECK(fz.p_value == fd.p_value);
}

TEST_CASE("score_test_pvalue degenerate and symmetric cases") {
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(5);
    CHECK(score_test_pvalue(zeros) == 1.0);

    Eigen::VectorXd anti(4);
    anti << 2.5, -2.5, 1.0, -1.0;
    CHECK(score_test_pvalue(anti) == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd one(1);
    one << 1.0;
    CHECK_THROWS_AS(score_test_pvalue(one), Error);
}

TEST_CASE("sandwich_variance plug-in and failure") {
    Eigen::VectorXd u(4);
    u << 1, -1, 2, -2;  // mean 0, var 10/3
    Eigen::VectorXd du = -Eigen::VectorXd::Ones(4);
    double v = (1.0 + 1.0 + 4.0 + 4.0) / 3.0;
    CHECK(sandwich_variance(u, du) == doctest::Approx(v / 4.0).epsilon(1e-12));

    Eigen::VectorXd du0(4);
    du0 << 1, -1, 1, -1;
    CHECK_THROWS_WITH_AS(sandwich_variance(u, du0), doctest::Contains("derivative"), Error);
}

TEST_CASE("ci_invert on a mock p-value function") {
    double m = 3.0, width = 2.0;
    auto pfun = [&](double b) { return std::max(0.0, 1.0 - std::abs(b - m) / width); };
    CiOptions opts;
    opts.initial_halfwidth = 0.5;
    auto [lo, hi] = ci_invert(pfun, m, opts);
    double target = width * (1.0 - 0.05);
    CHECK(lo == doctest::Approx(m - target).epsilon(1e-4));
    CHECK(hi == doctest::Approx(m + target).epsilon(1e-4));
    CHECK(std::abs(pfun(lo) - 0.05) < 1e-6);

    // p never drops below alpha on one side -> bracket failure
    auto stuck = [](double) { return 0.5; };
    CHECK_THROWS_AS(ci_invert(stuck, 0.0, opts), Error);
    // p at the estimate already below alpha
    auto low = [](double) { return 0.01; };
    CHECK_THROWS_AS(ci_invert(low, 0.0, opts), Error);
}

TEST_CASE("aalen_pvalue_at is consistent with the CI endpoints") {
    auto sim = generate(testutil::small_confounded(250, 2e-4, 3));
    auto grid = event_grid(sim.data);
    auto fit = aalen_solve(sim.data, grid, Regressor::Arm, {}, 0.05, true);
    CHECK(std::abs(aalen_pvalue_at(sim.data, grid, Regressor::Arm, fit.ci_lo) - 0.05) < 1e-5);
    CHECK(std::abs(aalen_pvalue_at(sim.data, grid, Regressor::Arm, fit.ci_hi) - 0.05) < 1e-5);
    CHECK(fit.ci_lo < fit.beta);
    CHECK(fit.ci_hi > fit.beta);
}

TEST_SUITE_END();
