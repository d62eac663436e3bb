#include "switchiv/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace switchiv {

namespace {

Dataset subset_covariates(const Dataset& d, const std::vector<std::string>& names) {
    if (names.empty()) return d;
    std::vector<size_t> cols;
    for (const auto& name : names) {
        auto it = std::find(d.covariate_names.begin(), d.covariate_names.end(), name);
        if (it == d.covariate_names.end()) throw Error("unknown covariate: " + name);
        cols.push_back(static_cast<size_t>(it - d.covariate_names.begin()));
    }
    Dataset out = d;
    out.covariate_names = names;
    for (auto& s : out.subjects) {
        std::vector<double> v;
        v.reserve(cols.size());
        for (size_t c : cols) v.push_back(s.covariates[c]);
        s.covariates = std::move(v);
    }
    return out;
}

void fill_from_aalen(AnalysisResult& r, const AalenFit& fit) {
    r.beta = fit.beta;
    r.se = fit.se;
    r.p = fit.p_value;
    r.ci_lo = fit.ci_lo;
    r.ci_hi = fit.ci_hi;
    r.n = fit.n;
    r.n_events = fit.n_events;
}

void fill_rr(AnalysisResult& r, const std::vector<double>& times, bool with_ci) {
    for (double t : times) {
        RiskRatioAt rr;
        rr.t = t;
        rr.rr = risk_ratio(r.beta, t);
        rr.lo = with_ci ? risk_ratio(r.ci_lo, t) : rr.rr;
        rr.hi = with_ci ? risk_ratio(r.ci_hi, t) : rr.rr;
        r.rr_at.push_back(rr);
    }
}

}  // namespace

AnalysisResult analyze_method(const Dataset& d_in, const MethodSpec& spec,
                              const MethodOptions& opts) {
    Dataset d = subset_covariates(d_in, opts.covariates);
    AnalysisResult r;
    r.method = spec.method;
    const std::string& m = spec.method;

    auto run_aalen = [&](const Dataset& dd, Regressor reg) {
        EventGrid grid = event_grid(dd, m == "per-protocol" || m == "censor-at-switch"
                                            ? std::optional<double>{}
                                            : opts.tau);
        auto fit = aalen_solve(dd, grid, reg, {}, opts.alpha, opts.with_ci);
        fill_from_aalen(r, fit);
        if (opts.truth) r.p_at_truth = aalen_pvalue_at(dd, grid, reg, *opts.truth);
        return grid.tau_end;
    };

    double tau = 0.0;
    if (m == "treatment-policy") {
        tau = run_aalen(d, Regressor::Arm);
    } else if (m == "per-protocol") {
        tau = run_aalen(transform_exclude_switchers(d), Regressor::Arm);
    } else if (m == "censor-at-switch") {
        tau = run_aalen(transform_censor_at_switch(d), Regressor::Arm);
    } else if (m == "as-treated") {
        tau = run_aalen(d, Regressor::AsTreated);
    } else if (m == "ipcw-baseline" || m == "ipcw-pd" || m == "ipcw-pd-time") {
        SwitchModelSpec sm;
        sm.pd_indicator = m != "ipcw-baseline";
        sm.time_since_pd = m == "ipcw-pd-time";
        WeightFlavor flavor =
            m == "ipcw-baseline" ? WeightFlavor::BaselineOnly : WeightFlavor::Stabilized;
        WeightTrajectory traj;
        double p_truth = 1.0;
        auto fit = ipcw_estimate(d, flavor, sm, IpcwOptions{}, opts.alpha, opts.with_ci, &traj,
                                 opts.truth, opts.truth ? &p_truth : nullptr);
        fill_from_aalen(r, fit);
        if (opts.truth) r.p_at_truth = p_truth;
        r.weight_summary = traj.summary(d);
        tau = d.subjects.empty() ? 0.0 : event_grid(transform_censor_at_switch(d)).tau_end;
    } else if (m == "iv-initial") {
        EventGrid grid = event_grid(d, opts.tau);
        OneStepConfig cfg;
        cfg.alpha = opts.alpha;
        double b0 = initial_beta(d, grid, cfg);
        auto sc = onestep_scores(d, grid, b0, nullptr, false, cfg, /*with_derivative=*/true);
        r.beta = b0;
        r.beta0 = b0;
        r.se = std::sqrt(sandwich_variance(sc.u, sc.udot));
        auto pfun = [&](double b) {
            auto s = onestep_scores(d, grid, b, nullptr, false, cfg);
            return score_test_pvalue(s.u);
        };
        r.p = pfun(0.0);
        if (opts.truth) r.p_at_truth = pfun(*opts.truth);
        if (opts.with_ci) {
            CiOptions copts;
            copts.alpha = opts.alpha;
            copts.initial_halfwidth = std::max(r.se, 1e-12);
            std::tie(r.ci_lo, r.ci_hi) = ci_invert(pfun, r.beta, copts);
        }
        r.n = d.subjects.size();
        for (const auto& s : d.subjects)
            if (s.event) ++r.n_events;
        tau = grid.tau_end;
    } else if (m == "iv-onestep") {
        EventGrid grid = event_grid(d, opts.tau);
        OneStepConfig cfg;
        cfg.alpha = opts.alpha;
        cfg.hazard_intercept_only = spec.hazard_intercept_only;
        cfg.z_model_intercept_only = spec.z_model_intercept_only;
        auto est = onestep_update(d, grid, cfg, opts.with_ci);
        r.beta = est.beta;
        r.beta0 = est.beta0;
        r.se = est.se;
        r.p = est.p_value;
        r.ci_lo = est.ci_lo;
        r.ci_hi = est.ci_hi;
        r.n = est.n;
        r.n_events = est.n_events;
        r.diagnostic_max_dev = est.diagnostic_max_dev;
        if (opts.truth) {
            CoxFit hazard = fit_experimental_hazard(d, cfg.hazard_intercept_only);
            r.p_at_truth = onestep_pvalue_at(d, grid, *opts.truth, hazard, cfg);
        }
        tau = grid.tau_end;
    } else {
        throw Error("unknown method: " + m);
    }

    std::vector<double> rr_times = opts.rr_times.empty() ? std::vector<double>{tau} : opts.rr_times;
    fill_rr(r, rr_times, opts.with_ci);
    return r;
}

std::string result_to_json(const AnalysisResult& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["beta"] = r.beta;
    j["se"] = r.se;
    j["p"] = r.p;
    j["ci"] = {r.ci_lo, r.ci_hi};
    j["n"] = r.n;
    j["n_events"] = r.n_events;
    if (r.beta0) j["beta0"] = *r.beta0;
    if (r.diagnostic_max_dev) j["diagnostic_max_dev"] = *r.diagnostic_max_dev;
    if (!r.rr_at.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& rr : r.rr_at)
            arr.push_back({{"t", rr.t}, {"rr", rr.rr}, {"lo", rr.lo}, {"hi", rr.hi}});
        j["rr_at"] = arr;
    }
    if (r.weight_summary) {
        const auto& w = *r.weight_summary;
        j["weights"] = {{"min", w.min}, {"q1", w.q1},   {"median", w.median},
                        {"mean", w.mean}, {"q3", w.q3}, {"max", w.max}};
    }
    return j.dump(2) + "\n";
}

McSummary monte_carlo(const SimConfig& cfg, const MethodSpec& spec, size_t reps, double alpha,
                      double failure_cap) {
    if (reps < 2) throw Error("monte_carlo: need at least 2 replicates");
    McSummary sum;
    sum.method = spec.method;
    sum.reps = reps;

    std::vector<double> betas, ses;
    size_t covered = 0, rejected = 0, cov_n = 0;
    std::string last_error;
    size_t max_failures = static_cast<size_t>(failure_cap * static_cast<double>(reps));
    MethodOptions opts;
    opts.alpha = alpha;
    opts.with_ci = false;
    opts.truth = cfg.beta;

    for (size_t rep = 0; rep < reps; ++rep) {
        SimConfig c = cfg;
        c.seed = derive_seed(cfg.seed, rep + 1);
        try {
            auto sim = generate(c);
            auto res = analyze_method(sim.data, spec, opts);
            betas.push_back(res.beta);
            ses.push_back(res.se);
            if (res.p_at_truth) {
                ++cov_n;
                if (*res.p_at_truth > alpha) ++covered;
            }
            if (res.p <= alpha) ++rejected;
        } catch (const Error& e) {
            ++sum.failures;
            last_error = e.what();
            if (sum.failures > max_failures)
                throw Error("monte_carlo: failure cap exceeded after rep " +
                            std::to_string(rep) + "; last error: " + last_error);
        }
    }
    size_t ok = betas.size();
    if (ok < 2) throw Error("monte_carlo: too few successful replicates");
    double mean_b = 0.0;
    for (double b : betas) mean_b += b;
    mean_b /= static_cast<double>(ok);
    double ss = 0.0;
    for (double b : betas) ss += (b - mean_b) * (b - mean_b);
    sum.mean_bias = mean_b - cfg.beta;
    sum.empirical_sd = std::sqrt(ss / static_cast<double>(ok - 1));
    double mean_se = 0.0;
    for (double s : ses) mean_se += s;
    sum.mean_se = mean_se / static_cast<double>(ok);
    sum.coverage = cov_n ? static_cast<double>(covered) / static_cast<double>(cov_n) : 0.0;
    sum.rejection = static_cast<double>(rejected) / static_cast<double>(ok);
    return sum;
}

}  // namespace switchiv
