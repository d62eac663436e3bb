#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "switchiv/dataset.hpp"

using namespace switchiv;
using testutil::subject;
using testutil::write_tmp;

TEST_SUITE_BEGIN("dataset");

TEST_CASE("parse_subjects maps fields and sentinels") {
    auto path = write_tmp("parse.csv",
                          "id,arm,time,event,switch_time,l1\n"
                          "p1,1,100,1,40,0.5\n"
                          "p3,1,200,0,,0.25\n");
    auto d = parse_subjects(path);
    REQUIRE(d.subjects.size() == 2);
    const auto& s = d.subjects[0];
    CHECK(s.id == "p1");
    CHECK(s.arm == 1);
    CHECK(s.time == 100);
    CHECK(s.event);
    REQUIRE(s.switch_time.has_value());
    CHECK(*s.switch_time == 40);
    REQUIRE(s.covariates.size() == 1);
    CHECK(s.covariates[0] == 0.5);
    CHECK(d.covariate_names == std::vector<std::string>{"l1"});
    CHECK_FALSE(d.subjects[1].switch_time.has_value());
}

TEST_CASE("parse_subjects rejects experimental-arm switchers") {
    auto path = write_tmp("badswitch.csv",
                          "id,arm,time,event,switch_time\n"
                          "p2,0,50,0,20\n");
    CHECK_THROWS_WITH_AS(parse_subjects(path),
                         doctest::Contains("experimental-arm subject with switch_time"), Error);
}

TEST_CASE("parse_subjects rejects missing columns and bad cells") {
    CHECK_THROWS_WITH_AS(parse_subjects(write_tmp("nocol.csv", "id,arm,time\np1,1,5\n")),
                         doctest::Contains("missing required column"), Error);
    CHECK_THROWS_WITH_AS(
        parse_subjects(write_tmp("badnum.csv", "id,arm,time,event\np1,1,abc,1\n")),
        doctest::Contains("non-numeric"), Error);
    CHECK_THROWS_AS(parse_subjects("no_such_file.csv"), Error);
}

TEST_CASE("validate lists violations") {
    Dataset d;
    d.subjects.push_back(subject("a", 1, 100, true, 120.0));
    d.subjects.push_back(subject("b", 0, 50, false));
    d.subjects.push_back(subject("b", 0, 60, false));
    auto rep = validate(d);
    REQUIRE(rep.issues.size() == 2);
    CHECK(rep.issues[0].message == "switch after end of follow-up");
    CHECK(rep.issues[1].message == "duplicate id");

    Dataset ok;
    ok.subjects = {subject("a", 0, 1, true), subject("b", 1, 2, false), subject("c", 1, 3, true)};
    CHECK(validate(ok).ok());
}

TEST_CASE("treatment_at follows the right-continuous switch") {
    auto exp = subject("e", 0, 1000, false);
    auto ctrl = subject("c", 1, 1000, false);
    auto sw = subject("s", 1, 1000, false, 40.0);
    CHECK(treatment_at(exp, 500) == 0.0);
    CHECK(treatment_at(ctrl, 500) == 1.0);
    CHECK(treatment_at(sw, 39.999) == 1.0);
    CHECK(treatment_at(sw, 40) == 0.0);  // new treatment applies at the switch instant
    CHECK(treatment_at(sw, 500) == 0.0);
}

TEST_CASE("cumulative_exposure three cases") {
    CHECK(cumulative_exposure(subject("e", 0, 1000, false), 300) == 0.0);
    CHECK(cumulative_exposure(subject("c", 1, 1000, false), 300) == 300.0);
    CHECK(cumulative_exposure(subject("s", 1, 1000, false, 40.0), 300) == 40.0);
}

TEST_CASE("cumulative_exposure equals the integral of treatment_at") {
    auto sw = subject("s", 1, 1000, false, 40.0);
    for (double t : {0.0, 10.0, 40.0, 41.0, 300.0}) {
        // piecewise-linear identity: integrate the step function analytically
        double integral = std::min(t, 40.0);
        CHECK(cumulative_exposure(sw, t) == integral);
    }
    // monotone and bounded by t
    double prev = 0.0;
    for (double t = 0; t <= 100; t += 7) {
        double v = cumulative_exposure(sw, t);
        CHECK(v >= prev);
        CHECK(v <= t);
        prev = v;
    }
}

TEST_CASE("event_grid sorts, dedupes, and honors overrides") {
    Dataset d;
    d.subjects = {subject("a", 0, 5, true), subject("b", 1, 3, true), subject("c", 0, 5, true),
                  subject("d", 1, 800, false)};
    auto g = event_grid(d);
    CHECK(g.times == std::vector<double>{3, 5});
    CHECK(g.tau_end == 800);

    auto g2 = event_grid(d, 1000.0);
    CHECK(g2.tau_end == 1000);

    CHECK_THROWS_AS(event_grid(d, 4.0), Error);  // before the last event

    Dataset censored;
    censored.subjects = {subject("a", 0, 5, false)};
    CHECK_THROWS_WITH_AS(event_grid(censored), doctest::Contains("no events"), Error);
}

TEST_CASE("serialize then parse round-trips") {
    Dataset d;
    d.covariate_names = {"l1", "l2"};
    d.subjects = {subject("a", 0, 123.456, true, {}, {0.5, -1.25}),
                  subject("b", 1, 200, false, 77.125, {1, 0}, 30.5),
                  subject("c", 1, 99.5, true, {}, {0.25, 3})};
    auto path = write_tmp("roundtrip.csv", serialize_subjects_string(d));
    auto d2 = parse_subjects(path);
    CHECK(serialize_subjects_string(d2) == serialize_subjects_string(d));
    REQUIRE(d2.subjects.size() == 3);
    CHECK(d2.subjects[1].switch_time == d.subjects[1].switch_time);
    CHECK(d2.subjects[1].prog_time == d.subjects[1].prog_time);
    CHECK(d2.subjects[0].covariates == d.subjects[0].covariates);
}

TEST_CASE("tv rows parse and validate") {
    Dataset d;
    d.subjects = {subject("a", 1, 10, true)};
    auto path = write_tmp("tv.csv", "id,start,stop,pd\na,0,4,0\na,4,10,1\n");
    parse_tv_rows(path, d);
    REQUIRE(d.tv_rows.size() == 2);
    CHECK(d.tv_covariate_names == std::vector<std::string>{"pd"});
    CHECK(validate(d).ok());

    d.tv_rows.push_back({"zz", 0, 5, {1}});
    d.tv_rows.push_back({"a", 5, 5, {1}});
    auto rep = validate(d);
    REQUIRE(rep.issues.size() == 2);
    CHECK(rep.issues[0].message == "tv row for unknown subject");
    CHECK(rep.issues[1].message == "tv row with start >= stop");
}

TEST_SUITE_END();
