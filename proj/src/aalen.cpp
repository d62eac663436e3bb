#include "switchiv/aalen.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "risk_index.hpp"

namespace switchiv {

double regressor_value(const SubjectRecord& s, Regressor r, double t) {
    return r == Regressor::Arm ? static_cast<double>(s.arm) : treatment_at(s, t);
}

namespace {

// The score is affine in beta: U_i(beta) = A_i - beta * B_i, with the
// time-varying intercept increment profiled out per event time. The
// centering mean is unweighted; IPCW weights multiply the whole integrand.
struct AffineScore {
    Eigen::VectorXd a, b;
    std::vector<double> c, e;  // profiled intercept: dDelta_j(beta) = c_j - beta e_j
};

AffineScore build_affine(const Dataset& d, const EventGrid& grid, Regressor r,
                         const WeightFn& weights) {
    const auto& subj = d.subjects;
    const size_t n = subj.size();
    RiskIndex idx(d, grid);

    AffineScore sc;
    sc.a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    sc.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    sc.c.resize(grid.times.size());
    sc.e.resize(grid.times.size());

    bool any_variation = false;
    double prev_t = 0.0;
    std::vector<double> rv(n), wv(n);
    for (size_t j = 0; j < grid.times.size(); ++j) {
        const double t = grid.times[j];
        const double dt = t - prev_t;
        const size_t m = idx.n_at_risk[j];

        double sum_r = 0.0, sum_y = 0.0;       // unweighted centering
        double sum_w = 0.0, sum_wr = 0.0, sum_wdn = 0.0;
        for (size_t k = 0; k < m; ++k) {
            size_t i = idx.order[k];
            const auto& s = subj[i];
            double ri = regressor_value(s, r, t);
            double wi = weights ? weights(i, t) : 1.0;
            rv[i] = ri;
            wv[i] = wi;
            sum_r += ri;
            sum_y += 1.0;
            sum_w += wi;
            sum_wr += wi * ri;
            if (s.event && s.time == t) sum_wdn += wi;
        }
        if (sum_w <= 0.0) throw Error("aalen: non-positive total weight at an event time");
        double rbar = sum_r / sum_y;
        double cj = sum_wdn / sum_w;
        double ej = sum_wr * dt / sum_w;
        sc.c[j] = cj;
        sc.e[j] = ej;

        for (size_t k = 0; k < m; ++k) {
            size_t i = idx.order[k];
            const auto& s = subj[i];
            double dn = (s.event && s.time == t) ? 1.0 : 0.0;
            double centered = (rv[i] - rbar) * wv[i];
            if (centered != 0.0) any_variation = true;
            sc.a[static_cast<Eigen::Index>(i)] += centered * (dn - cj);
            sc.b[static_cast<Eigen::Index>(i)] += centered * (rv[i] * dt - ej);
        }
        prev_t = t;
    }
    if (!any_variation) throw Error("aalen: degenerate regressor (no variation at any event time)");
    return sc;
}

}  // namespace

ScoreVector aalen_score(const Dataset& d, const EventGrid& grid, Regressor r, double beta,
                        const WeightFn& weights) {
    auto sc = build_affine(d, grid, r, weights);
    ScoreVector out;
    out.u = sc.a - beta * sc.b;
    out.udot = -sc.b;
    return out;
}

double score_test_pvalue(const Eigen::VectorXd& scores) {
    const auto n = scores.size();
    if (n < 2) throw Error("score_test_pvalue: need at least 2 scores");
    double mean = scores.mean();
    double ss = (scores.array() - mean).square().sum();
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return mean == 0.0 ? 1.0 : 0.0;
    double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t dist(static_cast<double>(n - 1));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double aalen_pvalue_at(const Dataset& d, const EventGrid& grid, Regressor r, double b,
                       const WeightFn& weights) {
    auto sc = build_affine(d, grid, r, weights);
    return score_test_pvalue(sc.a - b * sc.b);
}

double sandwich_variance(const Eigen::VectorXd& scores, const Eigen::VectorXd& derivs) {
    const auto n = scores.size();
    if (n < 2) throw Error("sandwich_variance: need at least 2 scores");
    double mean_d = derivs.mean();
    if (mean_d == 0.0) throw Error("sandwich_variance: zero mean score derivative");
    double mean_u = scores.mean();
    double var_u = (scores.array() - mean_u).square().sum() / static_cast<double>(n - 1);
    return var_u / (static_cast<double>(n) * mean_d * mean_d);
}

std::pair<double, double> ci_invert(const std::function<double(double)>& pvalue_of_beta,
                                    double beta_hat, const CiOptions& opts) {
    if (pvalue_of_beta(beta_hat) <= opts.alpha)
        throw Error("ci_invert: p-value at the estimate does not exceed alpha");

    auto solve_side = [&](double direction) {
        double h = opts.initial_halfwidth;
        double inner = beta_hat, outer = beta_hat + direction * h;
        int tries = 0;
        while (pvalue_of_beta(outer) > opts.alpha) {
            inner = outer;
            h *= 2.0;
            outer = beta_hat + direction * h;
            if (++tries > opts.max_expand) throw Error("ci_invert: bracket not found within span");
        }
        // bisect: p(inner) > alpha >= p(outer)
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (inner + outer);
            double p = pvalue_of_beta(mid);
            if (std::abs(p - opts.alpha) < opts.p_tol) return mid;
            (p > opts.alpha ? inner : outer) = mid;
        }
        return 0.5 * (inner + outer);
    };
    double lo = solve_side(-1.0);
    double hi = solve_side(+1.0);
    return {lo, hi};
}

AalenFit aalen_solve(const Dataset& d, const EventGrid& grid, Regressor r,
                     const WeightFn& weights, double alpha, bool with_ci) {
    auto sc = build_affine(d, grid, r, weights);
    double sum_b = sc.b.sum();
    if (sum_b == 0.0) throw Error("aalen_solve: singular normal equations");

    AalenFit fit;
    fit.n = d.subjects.size();
    fit.n_events = 0;
    for (const auto& s : d.subjects)
        if (s.event) ++fit.n_events;
    fit.beta = sc.a.sum() / sum_b;
    fit.scores = sc.a - fit.beta * sc.b;
    fit.se = std::sqrt(sandwich_variance(fit.scores, -sc.b));
    fit.p_value = score_test_pvalue(sc.a);
    fit.grid_times = grid.times;
    fit.intercept_increments.resize(grid.times.size());
    for (size_t j = 0; j < grid.times.size(); ++j)
        fit.intercept_increments[j] = sc.c[j] - fit.beta * sc.e[j];
    if (with_ci) {
        CiOptions copts;
        copts.alpha = alpha;
        copts.initial_halfwidth = std::max(fit.se, 1e-12);
        auto [lo, hi] = ci_invert(
            [&](double b) { return score_test_pvalue(sc.a - b * sc.b); }, fit.beta, copts);
        fit.ci_lo = lo;
        fit.ci_hi = hi;
    }
    return fit;
}

}  // namespace switchiv
