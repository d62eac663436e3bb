#pragma once

#include <Eigen/Dense>
#include <vector>

#include "switchiv/common.hpp"

namespace switchiv {

// Counting-process record: at risk on (start, stop], event flag at stop.
struct CoxRow {
    double start = 0.0;
    double stop = 0.0;
    bool event = false;
    Eigen::VectorXd x;
};

struct CoxFit {
    Eigen::VectorXd theta;
    Eigen::VectorXd se;
    std::vector<double> baseline_times;       // event times, ascending
    std::vector<double> baseline_increments;  // Breslow dLambda0(t_j)
    bool separation = false;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;

    double linear_predictor(const Eigen::VectorXd& x) const { return theta.size() ? theta.dot(x) : 0.0; }
    double cumulative_baseline(double t) const;
    // Sum of baseline increments over (t0, t1], scaled by exp(theta'x).
    double increment_between(const Eigen::VectorXd& x, double t0, double t1) const;
    // exp{-Lambda0(t) exp(theta'x)} for fixed covariates.
    double predict_survival(const Eigen::VectorXd& x, double t) const;
};

// Newton-Raphson on the Breslow-ties log partial likelihood.
// Converged when the score max-norm < tol. Diverging |theta| > 10 stops the
// iteration with the separation flag set.
CoxFit fit_cox(const std::vector<CoxRow>& rows, double tol = 1e-8, int max_iter = 50);

// dLambda0(t_j) exp(theta'x) at an event time of the fit's grid.
double hazard_increment(const CoxFit& fit, const Eigen::VectorXd& x, double tj);

}  // namespace switchiv
