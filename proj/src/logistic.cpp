#include "switchiv/logistic.hpp"

#include <cmath>

namespace switchiv {

LogisticFit fit_weighted_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd* warm_start,
                                  double tol, int max_iter) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (n == 0) throw Error("logistic: empty input");

    double w1 = 0, w0 = 0;
    for (Eigen::Index i = 0; i < n; ++i) (z[i] != 0.0 ? w1 : w0) += w[i];
    if (w1 <= 0.0 || w0 <= 0.0) throw Error("logistic: one-class input");
    double wtot = w1 + w0;

    LogisticFit fit;
    fit.gamma = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);

    Eigen::VectorXd eta(n), prob(n), grad(p);
    Eigen::MatrixXd info(p, p);
    for (int it = 0; it < max_iter; ++it) {
        eta = X * fit.gamma;
        for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(eta[i]);
        grad = X.transpose() * (w.array() * (z - prob).array()).matrix();
        info = X.transpose() * (w.array() * prob.array() * (1.0 - prob.array())).matrix().asDiagonal() * X;
        fit.iterations = it + 1;
        if ((grad.array().abs() / wtot).maxCoeff() < tol && it > 0) break;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw Error("logistic: singular information matrix");
        fit.gamma += ldlt.solve(grad);
        if (fit.gamma.array().abs().maxCoeff() > 20.0) {
            fit.separation = true;
            break;
        }
    }
    fit.information = info;
    return fit;
}

}  // namespace switchiv
