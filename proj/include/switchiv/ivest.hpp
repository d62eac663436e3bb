#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "switchiv/aalen.hpp"
#include "switchiv/cox.hpp"
#include "switchiv/dataset.hpp"
#include "switchiv/survival.hpp"

namespace switchiv {

struct OneStepConfig {
    double alpha = 0.05;
    double initial_bracket = 0.05;   // per-day half-width for the initial root search
    double root_tol = 1e-10;         // relative tolerance on the summed score
    int min_class = 5;               // below this per-class at-risk count the Z-model
                                     // falls back to the intercept-only fit
    bool hazard_intercept_only = false;     // deliberately drop L from the hazard model
    bool z_model_intercept_only = false;    // deliberately drop L from the Z-model
    std::vector<double> rr_times;           // report exp(beta t) at these times
};

struct IvEstimate {
    double beta = 0.0;
    double beta0 = 0.0;  // initial covariate-free estimate
    double se = 0.0;
    double p_value = 1.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    Eigen::VectorXd scores, score_derivs;  // at beta
    size_t n = 0, n_events = 0;
    double diagnostic_max_dev = 0.0;
};

// Per-subject weights Y(tau_j) exp{beta int_0^tau_j D}.
std::vector<double> onestep_weights(const Dataset& d, double beta, double tau_j);

// Covariate-free initial estimate: root of the score with an intercept-only
// Z-model and no hazard-model term, found by bracketed bisection.
double initial_beta(const Dataset& d, const EventGrid& grid, const OneStepConfig& cfg = {});

// Experimental-arm conditional hazard model (step 2 of the algorithm).
CoxFit fit_experimental_hazard(const Dataset& d, bool intercept_only = false);

// Hazard model fitted on the pooled sample, valid under the null beta = 0
// where both arms share the hazard of the untreated counterfactual. Used for
// the score test at 0 so it coincides exactly with the treatment-policy
// Aalen test when the covariate set is empty.
CoxFit fit_pooled_null_hazard(const Dataset& d, bool intercept_only = false);

struct OneStepScores {
    Eigen::VectorXd u;
    Eigen::VectorXd udot;
    std::vector<double> mean_prediction;  // per grid time, when requested
};

// Score (and optionally its beta-derivative) with the per-event-time logistic
// nuisances refit at this beta. hazard == nullptr drops the hazard-model term.
OneStepScores onestep_scores(const Dataset& d, const EventGrid& grid, double beta,
                             const CoxFit* hazard, bool covariates_in_z_model,
                             const OneStepConfig& cfg = {}, bool with_derivative = false,
                             bool with_diagnostic = false);

IvEstimate onestep_update(const Dataset& d, const EventGrid& grid,
                              const OneStepConfig& cfg = {}, bool with_ci = true);

// Score-test p-value for H: beta = b with nuisances refit at b (hazard model
// from the experimental arm; it does not depend on beta).
double onestep_pvalue_at(const Dataset& d, const EventGrid& grid, double b, const CoxFit& hazard,
                         const OneStepConfig& cfg = {});

// Hypothetical risk ratio P[T(0)>t]/P[T(1)>t] = exp(beta t).
double risk_ratio(double beta, double t);

// P(T(1) > t) = exp(-beta t) * average of predicted experimental-arm survival
// over the full covariate sample; bands transform the CI of beta.
SurvivalCurve counterfactual_control_curve(const Dataset& d, const EventGrid& grid, double beta,
                                           const CoxFit& hazard,
                                           std::optional<std::pair<double, double>> beta_ci = {});

struct FlatnessDiagnostic {
    std::vector<double> times;
    std::vector<double> mean_prediction;
    double max_deviation = 0.0;  // max |mean_prediction - its time-average|
};

FlatnessDiagnostic flatness_diagnostic(const Dataset& d, const EventGrid& grid, double beta,
                                       const OneStepConfig& cfg = {});

}  // namespace switchiv
