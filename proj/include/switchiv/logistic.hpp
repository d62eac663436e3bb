#pragma once

#include <Eigen/Dense>

#include "switchiv/common.hpp"

namespace switchiv {

struct LogisticFit {
    Eigen::VectorXd gamma;
    // X' diag(w p (1-p)) X evaluated at the solution.
    Eigen::MatrixXd information;
    bool separation = false;
    int iterations = 0;
};

// Weighted logistic maximum likelihood via iteratively reweighted least
// squares (Newton). Converged when the max-norm of the mean gradient drops
// below tol. |gamma| diverging past 20 raises the separation flag.
LogisticFit fit_weighted_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& w,
                                  const Eigen::VectorXd* warm_start = nullptr,
                                  double tol = 1e-10, int max_iter = 60);

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace switchiv
