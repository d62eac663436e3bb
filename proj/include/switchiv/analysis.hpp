#pragma once

#include <optional>
#include <string>
#include <vector>

#include "switchiv/dataset.hpp"
#include "switchiv/ipcw.hpp"
#include "switchiv/ivest.hpp"
#include "switchiv/simtrial.hpp"

namespace switchiv {

// Closed method set; mirrors the analysis-report rows.
inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {
        "treatment-policy", "per-protocol", "censor-at-switch",
        "as-treated",       "ipcw-baseline", "ipcw-pd",
        "ipcw-pd-time",     "iv-initial",    "iv-onestep"};
    return names;
}

struct MethodSpec {
    std::string method;
    // Deliberate misspecification knobs for robustness studies.
    bool hazard_intercept_only = false;
    bool z_model_intercept_only = false;
};

struct MethodOptions {
    double alpha = 0.05;
    bool with_ci = true;
    std::optional<double> tau;          // study-end override
    std::optional<double> truth;        // when set, also compute the score-test
                                        // p-value at this beta (coverage checks)
    std::vector<double> rr_times;       // default: tau_end of the event grid
    std::vector<std::string> covariates;  // subset of covariate columns; empty = all
};

struct RiskRatioAt {
    double t = 0.0;
    double rr = 1.0;
    double lo = 1.0, hi = 1.0;
};

struct AnalysisResult {
    std::string method;
    double beta = 0.0;
    double se = 0.0;
    double p = 1.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    size_t n = 0, n_events = 0;
    std::optional<double> beta0;               // iv methods
    std::optional<double> diagnostic_max_dev;  // iv-onestep
    std::vector<RiskRatioAt> rr_at;
    std::optional<double> p_at_truth;
    std::optional<WeightSummary> weight_summary;  // ipcw methods
};

AnalysisResult analyze_method(const Dataset& d, const MethodSpec& spec,
                              const MethodOptions& opts = {});

std::string result_to_json(const AnalysisResult& r);

struct McSummary {
    std::string method;
    double mean_bias = 0.0;
    double empirical_sd = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;   // score test at true beta not rejected
    double rejection = 0.0;  // score test at 0 rejected
    size_t reps = 0;
    size_t failures = 0;
};

McSummary monte_carlo(const SimConfig& cfg, const MethodSpec& spec, size_t reps,
                      double alpha = 0.05, double failure_cap = 0.02);

}  // namespace switchiv
