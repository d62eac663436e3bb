#include "switchiv/cox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace switchiv {

namespace {

struct EventBlock {
    double t;
    std::vector<size_t> rows;  // rows with event at t
};

// Risk-set sweep over event times in descending order. A row is at risk at t
// when start < t <= stop; rows enter as t drops to their stop and leave once
// t drops to or below their start.
template <typename Visit>
void sweep(const std::vector<CoxRow>& rows, const std::vector<EventBlock>& blocks,
           const Eigen::VectorXd& eta, int order, Visit&& visit) {
    const size_t n = rows.size();
    const int p = rows.empty() ? 0 : static_cast<int>(rows[0].x.size());
    std::vector<size_t> by_stop(n), by_start(n);
    std::iota(by_stop.begin(), by_stop.end(), size_t{0});
    by_start = by_stop;
    std::stable_sort(by_stop.begin(), by_stop.end(),
                     [&](size_t a, size_t b) { return rows[a].stop > rows[b].stop; });
    std::stable_sort(by_start.begin(), by_start.end(),
                     [&](size_t a, size_t b) { return rows[a].start > rows[b].start; });

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    size_t add_ptr = 0, del_ptr = 0;
    auto include = [&](size_t r, double sign) {
        double e = sign * std::exp(eta[static_cast<Eigen::Index>(r)]);
        s0 += e;
        if (order >= 1) s1 += e * rows[r].x;
        if (order >= 2) s2 += e * rows[r].x * rows[r].x.transpose();
    };
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        double t = it->t;
        while (add_ptr < n && rows[by_stop[add_ptr]].stop >= t) include(by_stop[add_ptr++], +1.0);
        while (del_ptr < n && rows[by_start[del_ptr]].start >= t) include(by_start[del_ptr++], -1.0);
        visit(*it, s0, s1, s2);
    }
}

std::vector<EventBlock> event_blocks(const std::vector<CoxRow>& rows) {
    std::vector<size_t> ev;
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].event) ev.push_back(i);
    std::stable_sort(ev.begin(), ev.end(),
                     [&](size_t a, size_t b) { return rows[a].stop < rows[b].stop; });
    std::vector<EventBlock> blocks;
    for (size_t i : ev) {
        if (blocks.empty() || blocks.back().t != rows[i].stop)
            blocks.push_back({rows[i].stop, {}});
        blocks.back().rows.push_back(i);
    }
    return blocks;
}

}  // namespace

CoxFit fit_cox(const std::vector<CoxRow>& rows, double tol, int max_iter) {
    if (rows.empty()) throw Error("fit_cox: no rows");
    const int p = static_cast<int>(rows[0].x.size());
    auto blocks = event_blocks(rows);
    if (blocks.empty()) throw Error("fit_cox: no events");

    CoxFit fit;
    fit.theta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));

    auto eval = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
        for (size_t i = 0; i < rows.size(); ++i)
            eta[static_cast<Eigen::Index>(i)] = theta.size() ? theta.dot(rows[i].x) : 0.0;
        double ll = 0.0;
        if (grad) grad->setZero();
        if (hess) hess->setZero();
        sweep(rows, blocks, eta, hess ? 2 : (grad ? 1 : 0),
              [&](const EventBlock& b, double s0, const Eigen::VectorXd& s1, const Eigen::MatrixXd& s2) {
                  if (s0 <= 0.0) throw Error("fit_cox: empty risk set at an event time");
                  double dj = static_cast<double>(b.rows.size());
                  for (size_t r : b.rows) ll += eta[static_cast<Eigen::Index>(r)];
                  ll -= dj * std::log(s0);
                  if (grad) {
                      for (size_t r : b.rows) *grad += rows[r].x;
                      *grad -= dj * (s1 / s0);
                  }
                  if (hess) *hess += dj * (s2 / s0 - (s1 / s0) * (s1 / s0).transpose());
              });
        return ll;
    };

    if (p > 0) {
        Eigen::VectorXd grad(p);
        Eigen::MatrixXd hess(p, p);
        double ll = eval(fit.theta, &grad, &hess);
        for (int it = 0; it < max_iter; ++it) {
            fit.iterations = it + 1;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
            double dmax = ldlt.vectorD().maxCoeff();
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                ldlt.vectorD().minCoeff() <= 1e-12 * std::max(dmax, 1e-300))
                throw Error("fit_cox: singular information matrix");
            if (grad.array().abs().maxCoeff() < tol) {
                fit.converged = true;
                break;
            }
            Eigen::VectorXd step = ldlt.solve(grad);
            double scale = 1.0;
            Eigen::VectorXd theta_old = fit.theta;
            for (int half = 0; half < 30; ++half) {
                fit.theta = theta_old + scale * step;
                double ll_new = eval(fit.theta, nullptr, nullptr);
                if (ll_new >= ll - 1e-12 * std::abs(ll)) break;
                scale *= 0.5;
            }
            if (fit.theta.array().abs().maxCoeff() > 10.0) {
                fit.separation = true;
                break;
            }
            ll = eval(fit.theta, &grad, &hess);
        }
        if (!fit.converged && !fit.separation && grad.array().abs().maxCoeff() < tol)
            fit.converged = true;
        fit.loglik = ll;
        Eigen::MatrixXd hinv = hess.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
        fit.se = hinv.diagonal().array().max(0.0).sqrt();
    } else {
        fit.converged = true;
        fit.loglik = eval(fit.theta, nullptr, nullptr);
    }

    // Breslow baseline increments on the event grid.
    for (size_t i = 0; i < rows.size(); ++i)
        eta[static_cast<Eigen::Index>(i)] = fit.theta.size() ? fit.theta.dot(rows[i].x) : 0.0;
    std::vector<std::pair<double, double>> incs;  // (t, increment), filled descending
    sweep(rows, blocks, eta, 0,
          [&](const EventBlock& b, double s0, const Eigen::VectorXd&, const Eigen::MatrixXd&) {
              if (s0 <= 0.0) throw Error("fit_cox: empty risk set at an event time");
              incs.emplace_back(b.t, static_cast<double>(b.rows.size()) / s0);
          });
    for (auto it = incs.rbegin(); it != incs.rend(); ++it) {
        fit.baseline_times.push_back(it->first);
        fit.baseline_increments.push_back(it->second);
    }
    return fit;
}

double CoxFit::cumulative_baseline(double t) const {
    double cum = 0.0;
    for (size_t j = 0; j < baseline_times.size() && baseline_times[j] <= t; ++j)
        cum += baseline_increments[j];
    return cum;
}

double CoxFit::increment_between(const Eigen::VectorXd& x, double t0, double t1) const {
    auto lo = std::upper_bound(baseline_times.begin(), baseline_times.end(), t0);
    auto hi = std::upper_bound(baseline_times.begin(), baseline_times.end(), t1);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it)
        sum += baseline_increments[static_cast<size_t>(it - baseline_times.begin())];
    if (sum == 0.0) return 0.0;
    return theta.size() ? sum * std::exp(theta.dot(x)) : sum;
}

double CoxFit::predict_survival(const Eigen::VectorXd& x, double t) const {
    double lam = cumulative_baseline(t);
    if (theta.size()) lam *= std::exp(theta.dot(x));
    return std::exp(-lam);
}

double hazard_increment(const CoxFit& fit, const Eigen::VectorXd& x, double tj) {
    auto it = std::lower_bound(fit.baseline_times.begin(), fit.baseline_times.end(), tj);
    if (it == fit.baseline_times.end() || *it != tj)
        throw Error("hazard_increment: time not on the fitted event grid");
    double inc = fit.baseline_increments[static_cast<size_t>(it - fit.baseline_times.begin())];
    return fit.theta.size() ? inc * std::exp(fit.theta.dot(x)) : inc;
}

}  // namespace switchiv
