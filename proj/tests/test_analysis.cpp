#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "switchiv/analysis.hpp"

using namespace switchiv;

TEST_SUITE_BEGIN("analysis");

TEST_CASE("unknown method and unknown covariate are rejected") {
    auto sim = generate(testutil::small_confounded(100, 1e-4, 61));
    CHECK_THROWS_WITH_AS(analyze_method(sim.data, {"bogus", false, false}),
                         doctest::Contains("unknown method"), Error);
    MethodOptions opts;
    opts.covariates = {"not_a_column"};
    CHECK_THROWS_WITH_AS(analyze_method(sim.data, {"treatment-policy", false, false}, opts),
                         doctest::Contains("unknown covariate"), Error);
}

TEST_CASE("every method runs on a simulated dataset") {
    auto sim = generate(testutil::small_confounded(400, 2e-4, 67));
    MethodOptions opts;
    opts.with_ci = false;
    for (const auto& m : method_names()) {
        auto res = analyze_method(sim.data, {m, false, false}, opts);
        CHECK(res.method == m);
        CHECK(std::isfinite(res.beta));
        CHECK(res.se > 0);
        CHECK(res.p >= 0);
        CHECK(res.p <= 1);
        if (m == "per-protocol") {
            // switchers are excluded before fitting, so n reflects the kept subset
            CHECK(res.n < 400);
            CHECK(res.n > 0);
        } else {
            CHECK(res.n == 400);
        }
        REQUIRE(res.rr_at.size() == 1);
        // RR consistency: exactly the exponential transform of beta
        CHECK(res.rr_at[0].rr == std::exp(res.beta * res.rr_at[0].t));
        if (m.rfind("ipcw", 0) == 0) CHECK(res.weight_summary.has_value());
        if (m.rfind("iv-", 0) == 0) CHECK(res.beta0.has_value());
    }
}

TEST_CASE("risk-ratio CI endpoints transform the beta CI exactly") {
    auto sim = generate(testutil::small_confounded(300, 2e-4, 71));
    MethodOptions opts;
    opts.tau = 1500.0;
    auto res = analyze_method(sim.data, {"treatment-policy", false, false}, opts);
    REQUIRE(res.rr_at.size() == 1);
    CHECK(res.rr_at[0].t == 1500.0);
    CHECK(res.rr_at[0].rr == std::exp(res.beta * 1500.0));
    CHECK(res.rr_at[0].lo == std::exp(res.ci_lo * 1500.0));
    CHECK(res.rr_at[0].hi == std::exp(res.ci_hi * 1500.0));
    CHECK(res.ci_lo < res.beta);
    CHECK(res.beta < res.ci_hi);
}

TEST_CASE("result JSON carries the documented fields") {
    auto sim = generate(testutil::small_confounded(200, 2e-4, 73));
    MethodOptions opts;
    opts.with_ci = false;
    auto res = analyze_method(sim.data, {"iv-onestep", false, false}, opts);
    auto j = nlohmann::json::parse(result_to_json(res));
    for (const char* key : {"method", "beta", "se", "p", "ci", "n", "n_events", "beta0",
                            "diagnostic_max_dev", "rr_at"})
        CHECK(j.contains(key));
    CHECK(j["ci"].size() == 2);
    CHECK(j["method"] == "iv-onestep");
}

TEST_CASE("covariate subsetting changes the design") {
    auto sim = generate(testutil::small_confounded(300, 2e-4, 79));
    MethodOptions all;
    all.with_ci = false;
    MethodOptions one = all;
    one.covariates = {"biomarker"};
    auto a = analyze_method(sim.data, {"iv-onestep", false, false}, all);
    auto b = analyze_method(sim.data, {"iv-onestep", false, false}, one);
    CHECK(a.beta != b.beta);
}

TEST_CASE("analysis results are reproducible run to run") {
    auto sim = generate(testutil::small_confounded(250, 2e-4, 83));
    MethodOptions opts;
    opts.with_ci = false;
    for (const auto& m : {"treatment-policy", "ipcw-pd", "iv-onestep"}) {
        auto a = analyze_method(sim.data, {m, false, false}, opts);
        auto b = analyze_method(sim.data, {m, false, false}, opts);
        CHECK(result_to_json(a) == result_to_json(b));
    }
}

TEST_SUITE_END();
