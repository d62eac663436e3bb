#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "switchiv/survival.hpp"

using namespace switchiv;
using testutil::subject;

TEST_SUITE_BEGIN("survival");

namespace {

Dataset three_events() {
    Dataset d;
    d.subjects = {subject("a", 0, 1, true), subject("b", 0, 2, true), subject("c", 0, 3, true)};
    return d;
}

}  // namespace

TEST_CASE("risk_set at-risk and event indicators") {
    Dataset d;
    d.subjects = {subject("a", 0, 3, true), subject("b", 0, 5, true), subject("c", 0, 7, true)};
    auto snap = risk_set(d, 5);
    CHECK(snap.at_risk == std::vector<std::string>{"b", "c"});
    CHECK(snap.y == std::vector<char>{0, 1, 1});
    CHECK(snap.dn == std::vector<char>{0, 1, 0});

    CHECK(risk_set(d, 0).at_risk.size() == 3);
    CHECK(risk_set(d, 8).at_risk.empty());

    // risk-set size never grows with t
    size_t prev = 3;
    for (double t = 0; t <= 8; t += 0.5) {
        size_t cur = risk_set(d, t).at_risk.size();
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("kaplan_meier equals the hand product-limit") {
    auto c = kaplan_meier(three_events());
    REQUIRE(c.times == std::vector<double>{1, 2, 3});
    CHECK(c.probs[0] == 1.0 - 1.0 / 3.0);
    CHECK(c.probs[1] == (1.0 - 1.0 / 3.0) * (1.0 - 1.0 / 2.0));
    CHECK(c.probs[2] == 0.0);
    CHECK(c.at(0.5) == 1.0);
    CHECK(c.at(1.0) == 1.0 - 1.0 / 3.0);
    CHECK(c.at(2.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("kaplan_meier edge cases") {
    Dataset censored;
    censored.subjects = {subject("a", 0, 5, false), subject("b", 0, 9, false)};
    auto flat = kaplan_meier(censored);
    CHECK(flat.times.empty());
    CHECK(flat.at(100) == 1.0);

    Dataset one;
    one.subjects = {subject("a", 0, 5, true)};
    auto c = kaplan_meier(one);
    CHECK(c.at(4.999) == 1.0);
    CHECK(c.at(5) == 0.0);

    CHECK_THROWS_WITH_AS(kaplan_meier(one, [](const SubjectRecord&) { return false; }),
                         doctest::Contains("empty group"), Error);
}

TEST_CASE("kaplan_meier weight-scale invariance") {
    Dataset d = three_events();
    d.subjects.push_back(subject("d", 0, 2.5, false));
    auto unit = kaplan_meier(d);
    auto scaled = kaplan_meier(d, {}, [](size_t, double) { return 7.25; });
    REQUIRE(unit.times == scaled.times);
    for (size_t j = 0; j < unit.probs.size(); ++j)
        CHECK(unit.probs[j] == doctest::Approx(scaled.probs[j]).epsilon(1e-14));
}

TEST_CASE("kaplan_meier on event-only data equals empirical survival") {
    auto c = kaplan_meier(three_events());
    for (double t : {1.0, 2.0, 3.0}) {
        double empirical = (3.0 - t) / 3.0;  // fraction with T > t
        CHECK(c.at(t) == doctest::Approx(empirical).epsilon(1e-15));
    }
}

TEST_CASE("greenwood bands bracket the estimate") {
    Dataset d = three_events();
    d.subjects.push_back(subject("d", 0, 10, false));
    auto c = kaplan_meier(d, {}, {}, true);
    REQUIRE(c.lower.size() == c.probs.size());
    for (size_t j = 0; j < c.probs.size(); ++j) {
        CHECK(c.lower[j] <= c.probs[j]);
        CHECK(c.upper[j] >= c.probs[j]);
    }
}

TEST_CASE("curve_ratio") {
    auto a = kaplan_meier(three_events());
    SurvivalCurve b = a;
    b.probs = {0.9, 0.8, 0.5};
    auto same = curve_ratio(b, b);
    for (double p : same.probs) CHECK(p == 1.0);

    SurvivalCurve positive = a;
    positive.probs = {2.0 / 3.0, 1.0 / 3.0, 0.25};
    auto r = curve_ratio(b, positive);
    CHECK(r.at(1.5) == doctest::Approx(0.9 / (2.0 / 3.0)));
    CHECK_THROWS_WITH_AS(curve_ratio(a, a), doctest::Contains("division by zero"), Error);
}

TEST_CASE("curve CSV export") {
    auto c = kaplan_meier(three_events(), {}, {}, true);
    write_curve_csv(c, "tmp_curve.csv");
    std::ifstream in("tmp_curve.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "time,survival,lower,upper");
    size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == c.times.size());
}

TEST_SUITE_END();
