#include "switchiv/ivest.hpp"

#include <cmath>

#include "risk_index.hpp"
#include "switchiv/logistic.hpp"

namespace switchiv {

std::vector<double> onestep_weights(const Dataset& d, double beta, double tau_j) {
    std::vector<double> w;
    w.reserve(d.subjects.size());
    for (const auto& s : d.subjects) {
        if (s.time < tau_j) {
            w.push_back(0.0);
            continue;
        }
        w.push_back(std::exp(beta * cumulative_exposure(s, tau_j)));
    }
    return w;
}

CoxFit fit_experimental_hazard(const Dataset& d, bool intercept_only) {
    std::vector<CoxRow> rows;
    for (const auto& s : d.subjects) {
        if (s.arm != 0) continue;
        CoxRow row;
        row.stop = s.time;
        row.event = s.event;
        if (!intercept_only)
            row.x = Eigen::Map<const Eigen::VectorXd>(s.covariates.data(),
                                                      static_cast<Eigen::Index>(s.covariates.size()));
        else
            row.x = Eigen::VectorXd();
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error("fit_experimental_hazard: no experimental-arm subjects");
    return fit_cox(rows);
}

CoxFit fit_pooled_null_hazard(const Dataset& d, bool intercept_only) {
    std::vector<CoxRow> rows;
    for (const auto& s : d.subjects) {
        CoxRow row;
        row.stop = s.time;
        row.event = s.event;
        if (!intercept_only)
            row.x = Eigen::Map<const Eigen::VectorXd>(s.covariates.data(),
                                                      static_cast<Eigen::Index>(s.covariates.size()));
        else
            row.x = Eigen::VectorXd();
        rows.push_back(std::move(row));
    }
    return fit_cox(rows);
}

OneStepScores onestep_scores(const Dataset& d, const EventGrid& grid, double beta,
                             const CoxFit* hazard, bool covariates_in_z_model,
                             const OneStepConfig& cfg, bool with_derivative,
                             bool with_diagnostic) {
    const auto& subj = d.subjects;
    const size_t n = subj.size();
    const size_t k = grid.times.size();
    RiskIndex idx(d, grid);

    size_t n_cov = subj.empty() ? 0 : subj[0].covariates.size();
    bool use_cov = covariates_in_z_model && !cfg.z_model_intercept_only && n_cov > 0;
    const Eigen::Index p = use_cov ? static_cast<Eigen::Index>(1 + n_cov) : 1;

    // Design rows in risk order so prefix blocks are contiguous.
    Eigen::MatrixXd Xs(n, p);
    Eigen::VectorXd zs(n);
    std::vector<double> haz_factor(n, 1.0);  // exp(theta' L_i) of the hazard model
    for (size_t kk = 0; kk < n; ++kk) {
        const auto& s = subj[idx.order[kk]];
        Xs(static_cast<Eigen::Index>(kk), 0) = 1.0;
        for (size_t c = 1; c < static_cast<size_t>(p); ++c)
            Xs(static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(c)) = s.covariates[c - 1];
        zs[static_cast<Eigen::Index>(kk)] = static_cast<double>(s.arm);
        if (hazard && hazard->theta.size()) {
            Eigen::Map<const Eigen::VectorXd> L(s.covariates.data(),
                                                static_cast<Eigen::Index>(s.covariates.size()));
            haz_factor[kk] = std::exp(hazard->theta.dot(L));
        }
    }

    OneStepScores out;
    out.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (with_derivative) out.udot = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (with_diagnostic) out.mean_prediction.resize(k);

    Eigen::VectorXd w(n), prob(n), cexp(n), dvec(n);
    Eigen::VectorXd gamma_warm;
    size_t base_ptr = 0;  // pointer into the hazard baseline grid
    double prev_t = 0.0;

    for (size_t j = 0; j < k; ++j) {
        const double t = grid.times[j];
        const double dt = t - prev_t;
        const size_t m = idx.n_at_risk[j];
        if (m == 0) break;

        // hazard baseline mass on (prev_t, t]
        double base_inc = 0.0;
        if (hazard) {
            while (base_ptr < hazard->baseline_times.size() && hazard->baseline_times[base_ptr] <= t) {
                if (hazard->baseline_times[base_ptr] > prev_t)
                    base_inc += hazard->baseline_increments[base_ptr];
                ++base_ptr;
            }
        }

        size_t n1 = 0, n0 = 0;
        for (size_t kk = 0; kk < m; ++kk) {
            const auto& s = subj[idx.order[kk]];
            double c = cumulative_exposure(s, t);
            cexp[static_cast<Eigen::Index>(kk)] = c;
            w[static_cast<Eigen::Index>(kk)] = std::exp(beta * c);
            dvec[static_cast<Eigen::Index>(kk)] = treatment_at(s, t);
            (s.arm == 1 ? n1 : n0) += 1;
        }

        // Z-model at this event time: weighted logistic in L, or the
        // intercept-only closed form (the weighted mean) as a fallback.
        bool intercept_fit = !use_cov || std::min(n1, n0) < static_cast<size_t>(cfg.min_class);
        double pbar = 0.0;
        Eigen::VectorXd gamma;
        Eigen::MatrixXd info;
        if (!intercept_fit) {
            try {
                auto fit = fit_weighted_logistic(Xs.topRows(static_cast<Eigen::Index>(m)),
                                                 zs.head(static_cast<Eigen::Index>(m)),
                                                 w.head(static_cast<Eigen::Index>(m)),
                                                 gamma_warm.size() ? &gamma_warm : nullptr);
                if (fit.separation) {
                    intercept_fit = true;
                } else {
                    gamma = fit.gamma;
                    info = fit.information;
                    gamma_warm = gamma;
                }
            } catch (const Error&) {
                intercept_fit = true;
            }
        }
        if (intercept_fit) {
            double sw = 0.0, swz = 0.0;
            for (size_t kk = 0; kk < m; ++kk) {
                sw += w[static_cast<Eigen::Index>(kk)];
                swz += w[static_cast<Eigen::Index>(kk)] * zs[static_cast<Eigen::Index>(kk)];
            }
            pbar = swz / sw;
            for (size_t kk = 0; kk < m; ++kk) prob[static_cast<Eigen::Index>(kk)] = pbar;
        } else {
            for (size_t kk = 0; kk < m; ++kk)
                prob[static_cast<Eigen::Index>(kk)] =
                    expit(gamma.dot(Xs.row(static_cast<Eigen::Index>(kk))));
        }

        // d(gamma)/d(beta) = M^{-1} sum_i X_i w_i C_i (Z_i - p_i)
        Eigen::VectorXd dgamma;
        double dgamma0 = 0.0;
        bool have_dgamma = false;
        if (with_derivative) {
            if (!intercept_fit) {
                Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
                for (size_t kk = 0; kk < m; ++kk) {
                    Eigen::Index i = static_cast<Eigen::Index>(kk);
                    v += Xs.row(i).transpose() * (w[i] * cexp[i] * (zs[i] - prob[i]));
                }
                Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
                if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                    dgamma = ldlt.solve(v);
                    have_dgamma = true;
                }
            } else if (pbar > 0.0 && pbar < 1.0) {
                double mm = 0.0, v = 0.0;
                for (size_t kk = 0; kk < m; ++kk) {
                    Eigen::Index i = static_cast<Eigen::Index>(kk);
                    mm += w[i] * pbar * (1.0 - pbar);
                    v += w[i] * cexp[i] * (zs[i] - pbar);
                }
                dgamma0 = v / mm;
                have_dgamma = true;
            }
        }

        for (size_t kk = 0; kk < m; ++kk) {
            Eigen::Index i = static_cast<Eigen::Index>(kk);
            size_t si = idx.order[kk];
            const auto& s = subj[si];
            double dn = (s.event && s.time == t) ? 1.0 : 0.0;
            double dlam = hazard ? base_inc * haz_factor[kk] : 0.0;
            double term = dn - (beta * dvec[i] * dt + dlam);
            double centered = (zs[i] - prob[i]) * w[i];
            out.u[static_cast<Eigen::Index>(si)] += centered * term;
            if (with_derivative) {
                double chain = 0.0;
                if (have_dgamma) {
                    double gx = intercept_fit ? dgamma0 : dgamma.dot(Xs.row(i));
                    chain = -prob[i] * (1.0 - prob[i]) * gx * w[i] * term;
                }
                double direct = centered * (cexp[i] * term - dvec[i] * dt);
                out.udot[static_cast<Eigen::Index>(si)] += chain + direct;
            }
        }

        if (with_diagnostic) {
            if (intercept_fit) {
                out.mean_prediction[j] = pbar;
            } else {
                double sum = 0.0;
                for (size_t kk = 0; kk < n; ++kk)
                    sum += expit(gamma.dot(Xs.row(static_cast<Eigen::Index>(kk))));
                out.mean_prediction[j] = sum / static_cast<double>(n);
            }
        }
        prev_t = t;
    }
    return out;
}

double initial_beta(const Dataset& d, const EventGrid& grid, const OneStepConfig& cfg) {
    bool has_control = false, has_experimental = false;
    for (const auto& s : d.subjects) (s.arm == 1 ? has_control : has_experimental) = true;
    if (!has_control || !has_experimental)
        throw Error("initial_beta: degenerate exposure (single-arm dataset)");

    OneStepConfig inner = cfg;
    auto score_sum = [&](double b, double* scale) {
        auto sc = onestep_scores(d, grid, b, nullptr, false, inner);
        if (scale) *scale = sc.u.array().abs().sum();
        return sc.u.sum();
    };

    double half = cfg.initial_bracket;
    double lo = -half, hi = half;
    double flo = score_sum(lo, nullptr), fhi = score_sum(hi, nullptr);
    int expand = 0;
    while (flo * fhi > 0.0) {
        if (++expand > 8) throw Error("initial_beta: no sign change in score bracket");
        half *= 2.0;
        lo = -half;
        hi = half;
        flo = score_sum(lo, nullptr);
        fhi = score_sum(hi, nullptr);
    }
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    // Illinois-accelerated bracketed root solve on the summed score: secant
    // proposals clipped to the bracket, with the stale endpoint's value halved
    // when the same side is retained, so convergence is superlinear while the
    // sign-change bracket is preserved.
    double a = lo, b = hi, fa = flo, fb = fhi;
    double c = b;
    for (int it = 0; it < 200; ++it) {
        c = b - fb * (b - a) / (fb - fa);
        if (!std::isfinite(c) || c <= std::min(a, b) || c >= std::max(a, b)) c = 0.5 * (a + b);
        double scale = 0.0;
        double fc = score_sum(c, &scale);
        if (std::abs(fc) <= cfg.root_tol * std::max(scale, 1.0) || std::abs(b - a) < 1e-18) break;
        if ((fc > 0.0) == (fb > 0.0)) {
            b = c;
            fb = fc;
            fa *= 0.5;
        } else {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
        }
    }
    return c;
}

double onestep_pvalue_at(const Dataset& d, const EventGrid& grid, double b, const CoxFit& hazard,
                         const OneStepConfig& cfg) {
    auto sc = onestep_scores(d, grid, b, &hazard, true, cfg);
    return score_test_pvalue(sc.u);
}

IvEstimate onestep_update(const Dataset& d, const EventGrid& grid, const OneStepConfig& cfg,
                              bool with_ci) {
    IvEstimate est;
    est.n = d.subjects.size();
    for (const auto& s : d.subjects)
        if (s.event) ++est.n_events;

    est.beta0 = initial_beta(d, grid, cfg);
    CoxFit hazard = fit_experimental_hazard(d, cfg.hazard_intercept_only);

    auto sc0 = onestep_scores(d, grid, est.beta0, &hazard, true, cfg, /*with_derivative=*/true);
    double sum_udot = sc0.udot.sum();
    if (sum_udot == 0.0) throw Error("onestep_update: zero summed score derivative");
    est.beta = est.beta0 - sc0.u.sum() / sum_udot;
    est.scores = sc0.u;
    est.score_derivs = sc0.udot;

    auto sch = onestep_scores(d, grid, est.beta, &hazard, true, cfg, /*with_derivative=*/true,
                              /*with_diagnostic=*/true);
    est.se = std::sqrt(sandwich_variance(sch.u, sch.udot));
    if (!sch.mean_prediction.empty()) {
        double mean = 0.0;
        for (double v : sch.mean_prediction) mean += v;
        mean /= static_cast<double>(sch.mean_prediction.size());
        for (double v : sch.mean_prediction)
            est.diagnostic_max_dev = std::max(est.diagnostic_max_dev, std::abs(v - mean));
    }

    // Score test at 0: under the null both arms share the hazard of the
    // untreated counterfactual, so the hazard nuisance is refit on the pooled
    // sample; with no covariates this reproduces the treatment-policy Aalen
    // test exactly.
    CoxFit pooled = fit_pooled_null_hazard(d, cfg.hazard_intercept_only);
    auto sc_null = onestep_scores(d, grid, 0.0, &pooled, true, cfg);
    est.p_value = score_test_pvalue(sc_null.u);

    if (with_ci) {
        CiOptions copts;
        copts.alpha = cfg.alpha;
        copts.initial_halfwidth = std::max(est.se, 1e-12);
        auto [lo, hi] = ci_invert(
            [&](double b) { return onestep_pvalue_at(d, grid, b, hazard, cfg); }, est.beta, copts);
        est.ci_lo = lo;
        est.ci_hi = hi;
    }
    return est;
}

double risk_ratio(double beta, double t) { return std::exp(beta * t); }

SurvivalCurve counterfactual_control_curve(const Dataset& d, const EventGrid& grid, double beta,
                                           const CoxFit& hazard,
                                           std::optional<std::pair<double, double>> beta_ci) {
    const auto& subj = d.subjects;
    const size_t n = subj.size();
    if (n == 0) throw Error("counterfactual_control_curve: empty dataset");
    std::vector<double> factor(n, 1.0);
    for (size_t i = 0; i < n; ++i) {
        if (hazard.theta.size()) {
            Eigen::Map<const Eigen::VectorXd> L(subj[i].covariates.data(),
                                                static_cast<Eigen::Index>(subj[i].covariates.size()));
            factor[i] = std::exp(hazard.theta.dot(L));
        }
    }
    SurvivalCurve c;
    size_t base_ptr = 0;
    double cum = 0.0;
    for (double t : grid.times) {
        while (base_ptr < hazard.baseline_times.size() && hazard.baseline_times[base_ptr] <= t)
            cum += hazard.baseline_increments[base_ptr++];
        double avg = 0.0;
        for (size_t i = 0; i < n; ++i) avg += std::exp(-cum * factor[i]);
        avg /= static_cast<double>(n);
        c.times.push_back(t);
        c.probs.push_back(std::exp(-beta * t) * avg);
        if (beta_ci) {
            c.lower.push_back(std::exp(-beta_ci->second * t) * avg);
            c.upper.push_back(std::exp(-beta_ci->first * t) * avg);
        }
    }
    return c;
}

FlatnessDiagnostic flatness_diagnostic(const Dataset& d, const EventGrid& grid, double beta,
                                       const OneStepConfig& cfg) {
    auto sc = onestep_scores(d, grid, beta, nullptr, true, cfg, false, /*with_diagnostic=*/true);
    FlatnessDiagnostic diag;
    diag.times = grid.times;
    diag.mean_prediction = sc.mean_prediction;
    double mean = 0.0;
    for (double v : diag.mean_prediction) mean += v;
    if (!diag.mean_prediction.empty()) mean /= static_cast<double>(diag.mean_prediction.size());
    for (double v : diag.mean_prediction)
        diag.max_deviation = std::max(diag.max_deviation, std::abs(v - mean));
    return diag;
}

}  // namespace switchiv
