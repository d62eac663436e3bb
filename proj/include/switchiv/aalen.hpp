#pragma once

#include <Eigen/Dense>
#include <functional>

#include "switchiv/dataset.hpp"
#include "switchiv/survival.hpp"

namespace switchiv {

// Regressor of the additive-hazards model: the randomized arm Z, or the
// treatment actually taken D(t) for the as-treated analysis.
enum class Regressor { Arm, AsTreated };

double regressor_value(const SubjectRecord& s, Regressor r, double t);

struct ScoreVector {
    Eigen::VectorXd u;
    Eigen::VectorXd udot;
};

struct AalenFit {
    double beta = 0.0;
    double se = 0.0;
    double p_value = 1.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    Eigen::VectorXd scores;  // U_i at beta
    std::vector<double> grid_times;
    std::vector<double> intercept_increments;  // profiled dDelta(tau_j) at beta
    size_t n = 0, n_events = 0;
};

ScoreVector aalen_score(const Dataset& d, const EventGrid& grid, Regressor r, double beta,
                        const WeightFn& weights = {});

AalenFit aalen_solve(const Dataset& d, const EventGrid& grid, Regressor r,
                     const WeightFn& weights = {}, double alpha = 0.05, bool with_ci = true);

// Two-sided one-sample t-test that the mean score is zero.
double score_test_pvalue(const Eigen::VectorXd& scores);

// p-value of the score test at candidate beta b; affine in b for this model.
double aalen_pvalue_at(const Dataset& d, const EventGrid& grid, Regressor r, double b,
                       const WeightFn& weights = {});

struct CiOptions {
    double alpha = 0.05;
    double p_tol = 1e-6;
    double initial_halfwidth = 1e-4;  // per day
    int max_expand = 60;
};

// Score-inversion interval: expand a bracket on each side of beta_hat until
// the p-value crosses alpha, then bisect to |p - alpha| < p_tol.
std::pair<double, double> ci_invert(const std::function<double(double)>& pvalue_of_beta,
                                    double beta_hat, const CiOptions& opts = {});

// var(beta_hat) = var(U) / (n * mean(Udot)^2)
double sandwich_variance(const Eigen::VectorXd& scores, const Eigen::VectorXd& derivs);

}  // namespace switchiv
