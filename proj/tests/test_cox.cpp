#include <doctest.h>

#include <cmath>

#include "switchiv/cox.hpp"

using namespace switchiv;

TEST_SUITE_BEGIN("cox");

namespace {

CoxRow row(double stop, bool event, std::vector<double> x, double start = 0.0) {
    CoxRow r;
    r.start = start;
    r.stop = stop;
    r.event = event;
    r.x = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return r;
}

std::vector<CoxRow> three_subject_fixture() {
    return {row(1, true, {1}), row(2, true, {0}), row(3, true, {1})};
}

}  // namespace

TEST_CASE("three-subject fixture has closed-form solution") {
    auto fit = fit_cox(three_subject_fixture());
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.theta[0] - (-0.5 * std::log(2.0))) < 1e-8);
    CHECK(fit.se[0] > 0);
}

TEST_CASE("baseline increments at theta 0 are Nelson-Aalen") {
    // no covariates: theta is empty and the increments are d_j / n_j
    std::vector<CoxRow> rows = {row(1, true, {}), row(2, true, {}), row(3, true, {})};
    auto fit = fit_cox(rows);
    REQUIRE(fit.baseline_times == std::vector<double>{1, 2, 3});
    CHECK(fit.baseline_increments[0] == 1.0 / 3.0);
    CHECK(fit.baseline_increments[1] == 1.0 / 2.0);
    CHECK(fit.baseline_increments[2] == 1.0);

    Eigen::VectorXd x(0);
    CHECK(fit.predict_survival(x, 0) == 1.0);
    CHECK(fit.predict_survival(x, 1) == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-12));
    // survival non-increasing
    double prev = 1.0;
    for (double t = 0; t <= 4; t += 0.25) {
        double s = fit.predict_survival(x, t);
        CHECK(s <= prev + 1e-15);
        prev = s;
    }
}

TEST_CASE("no events is rejected") {
    std::vector<CoxRow> rows = {row(1, false, {}), row(2, false, {})};
    CHECK_THROWS_WITH_AS(fit_cox(rows), doctest::Contains("no events"), Error);
}

TEST_CASE("covariate centering invariance") {
    auto rows = three_subject_fixture();
    auto shifted = rows;
    for (auto& r : shifted) r.x[0] += 3.0;
    auto f1 = fit_cox(rows);
    auto f2 = fit_cox(shifted);
    CHECK(std::abs(f1.theta[0] - f2.theta[0]) < 1e-7);
    // predicted survival is invariant to the shift
    Eigen::VectorXd x1(1), x2(1);
    x1 << 1.0;
    x2 << 4.0;
    for (double t : {1.0, 2.0, 3.0})
        CHECK(f1.predict_survival(x1, t) == doctest::Approx(f2.predict_survival(x2, t)).epsilon(1e-6));
}

TEST_CASE("constant covariate is singular") {
    std::vector<CoxRow> rows = {row(1, true, {1}), row(2, true, {1}), row(3, true, {1})};
    CHECK_THROWS_WITH_AS(fit_cox(rows), doctest::Contains("singular"), Error);
}

TEST_CASE("monotone likelihood raises the separation flag") {
    std::vector<CoxRow> rows = {row(1, true, {1}), row(2, true, {1}), row(3, false, {0}),
                                row(4, false, {0})};
    auto fit = fit_cox(rows);
    CHECK(fit.separation);
}

TEST_CASE("splitting a row into start-stop pieces changes nothing") {
    auto rows = three_subject_fixture();
    std::vector<CoxRow> split = {row(1, true, {1}),          row(0.8, false, {0}),
                                 row(2, true, {0}, 0.8),     row(1.2, false, {1}),
                                 row(2.4, false, {1}, 1.2),  row(3, true, {1}, 2.4)};
    auto f1 = fit_cox(rows);
    auto f2 = fit_cox(split);
    CHECK(std::abs(f1.theta[0] - f2.theta[0]) < 1e-8);
    REQUIRE(f1.baseline_increments.size() == f2.baseline_increments.size());
    for (size_t j = 0; j < f1.baseline_increments.size(); ++j)
        CHECK(f1.baseline_increments[j] == doctest::Approx(f2.baseline_increments[j]).epsilon(1e-10));
}

TEST_CASE("log partial likelihood does not decrease from zero") {
    auto fit = fit_cox(three_subject_fixture());
    // at theta = 0 the Breslow log PL of this fixture is -(ln3 + ln2 + ln1)
    double at_zero = -(std::log(3.0) + std::log(2.0));
    CHECK(fit.loglik >= at_zero - 1e-12);
}

TEST_CASE("hazard_increment validates the grid and scales with covariates") {
    auto fit = fit_cox(three_subject_fixture());
    Eigen::VectorXd lo(1), hi(1);
    lo << 0.0;
    hi << 1.0;
    double a = hazard_increment(fit, lo, 2.0);
    double b = hazard_increment(fit, hi, 2.0);
    CHECK(b == doctest::Approx(a * std::exp(fit.theta[0])).epsilon(1e-12));
    CHECK_THROWS_AS(hazard_increment(fit, lo, 2.5), Error);
}

TEST_CASE("increment_between sums increments over half-open windows") {
    std::vector<CoxRow> rows = {row(1, true, {}), row(2, true, {}), row(3, true, {})};
    auto fit = fit_cox(rows);
    Eigen::VectorXd x(0);
    CHECK(fit.increment_between(x, 1, 2) == 0.5);
    CHECK(fit.increment_between(x, 0, 2) == doctest::Approx(1.0 / 3.0 + 0.5).epsilon(1e-15));
    CHECK(fit.increment_between(x, 2, 2) == 0.0);
    CHECK(fit.cumulative_baseline(2.5) == doctest::Approx(1.0 / 3.0 + 0.5).epsilon(1e-15));
}

TEST_SUITE_END();
