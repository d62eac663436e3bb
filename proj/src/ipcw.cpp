#include "switchiv/ipcw.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace switchiv {

Dataset transform_exclude_switchers(const Dataset& d) {
    Dataset out;
    out.covariate_names = d.covariate_names;
    out.tv_covariate_names = d.tv_covariate_names;
    size_t control_left = 0;
    for (const auto& s : d.subjects) {
        if (s.arm == 1 && s.switch_time) continue;
        if (s.arm == 1) ++control_left;
        out.subjects.push_back(s);
    }
    bool had_control = std::any_of(d.subjects.begin(), d.subjects.end(),
                                   [](const SubjectRecord& s) { return s.arm == 1; });
    if (had_control && control_left == 0)
        throw Error("transform_exclude_switchers: control arm empty after exclusion");
    return out;
}

Dataset transform_censor_at_switch(const Dataset& d) {
    Dataset out = d;
    for (auto& s : out.subjects) {
        if (!s.switch_time) continue;
        s.time = *s.switch_time;
        s.event = false;
        s.switch_time.reset();
        if (s.prog_time && *s.prog_time > s.time) s.prog_time.reset();
    }
    return out;
}

namespace {

struct ControlFollowUp {
    size_t index;   // into d.subjects
    double follow;  // min(S, T)
    bool switched;
};

std::vector<ControlFollowUp> control_followup(const Dataset& d) {
    std::vector<ControlFollowUp> out;
    for (size_t i = 0; i < d.subjects.size(); ++i) {
        const auto& s = d.subjects[i];
        if (s.arm != 1) continue;
        out.push_back({i, s.switch_time ? *s.switch_time : s.time, s.switch_time.has_value()});
    }
    return out;
}

Eigen::VectorXd denominator_x(const SubjectRecord& s, const SwitchModelSpec& spec, double t) {
    size_t nl = s.covariates.size();
    Eigen::VectorXd x(static_cast<Eigen::Index>(nl + (spec.pd_indicator ? 1 : 0) +
                                                (spec.time_since_pd ? 1 : 0)));
    for (size_t c = 0; c < nl; ++c) x[static_cast<Eigen::Index>(c)] = s.covariates[c];
    Eigen::Index k = static_cast<Eigen::Index>(nl);
    double pd = (s.prog_time && t >= *s.prog_time) ? 1.0 : 0.0;
    if (spec.pd_indicator) x[k++] = pd;
    if (spec.time_since_pd) x[k++] = pd > 0.0 ? t - *s.prog_time : 0.0;
    return x;
}

}  // namespace

SwitchModels fit_switch_models(const Dataset& d, const SwitchModelSpec& spec) {
    auto ctrl = control_followup(d);
    if (ctrl.empty()) throw Error("fit_switch_models: no control subjects");
    if (std::none_of(ctrl.begin(), ctrl.end(), [](const ControlFollowUp& c) { return c.switched; }))
        throw Error("fit_switch_models: no switch events in the control arm");

    SwitchModels models;
    models.spec = spec;
    for (const auto& c : ctrl)
        if (c.switched) models.event_times.push_back(c.follow);
    std::sort(models.event_times.begin(), models.event_times.end());
    models.event_times.erase(std::unique(models.event_times.begin(), models.event_times.end()),
                             models.event_times.end());

    std::vector<CoxRow> num_rows;
    for (const auto& c : ctrl) {
        const auto& s = d.subjects[c.index];
        CoxRow row;
        row.stop = c.follow;
        row.event = c.switched;
        row.x = Eigen::Map<const Eigen::VectorXd>(s.covariates.data(),
                                                  static_cast<Eigen::Index>(s.covariates.size()));
        num_rows.push_back(std::move(row));
    }
    models.numerator = fit_cox(num_rows);

    bool tv = spec.pd_indicator || spec.time_since_pd;
    if (!tv) {
        models.denominator = models.numerator;
        return models;
    }

    // Expand into start-stop intervals so each switch event time sees the
    // covariate value current at that time. The PD indicator needs a single
    // split at progression; time-since-PD also needs splits at the event
    // times it is evaluated at.
    std::vector<CoxRow> den_rows;
    for (const auto& c : ctrl) {
        const auto& s = d.subjects[c.index];
        std::vector<double> cuts;
        if (s.prog_time && *s.prog_time <= c.follow) {
            // Rows carry the covariate value at their right endpoint, so the
            // pre-progression piece must end at the last switch-event time
            // strictly below progression: every event time it spans then sees
            // PD = 0, and the indicator turns on at onset for later rows.
            auto at = std::lower_bound(models.event_times.begin(), models.event_times.end(),
                                       *s.prog_time);
            if (at != models.event_times.begin()) {
                double pre = *(at - 1);
                if (pre > 0.0 && pre < c.follow) cuts.push_back(pre);
            }
            if (spec.time_since_pd)
                for (auto it = at; it != models.event_times.end() && *it < c.follow; ++it)
                    cuts.push_back(*it);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        double start = 0.0;
        for (double cut : cuts) {
            den_rows.push_back({start, cut, false, denominator_x(s, spec, cut)});
            start = cut;
        }
        den_rows.push_back({start, c.follow, c.switched, denominator_x(s, spec, c.follow)});
    }
    models.denominator = fit_cox(den_rows);
    return models;
}

WeightTrajectory compute_weights(const SwitchModels& models, const Dataset& d,
                                 const EventGrid& grid, WeightFlavor flavor,
                                 const IpcwOptions& opts) {
    WeightTrajectory traj;
    traj.flavor = flavor;
    traj.times = grid.times;
    auto ctrl = control_followup(d);
    const auto& den = models.denominator;
    const auto& num = models.numerator;

    for (const auto& c : ctrl) {
        const auto& s = d.subjects[c.index];
        traj.subject_index.push_back(c.index);
        std::vector<double> w(grid.times.size(), 1.0);
        if (flavor != WeightFlavor::None) {
            Eigen::Map<const Eigen::VectorXd> L(s.covariates.data(),
                                                static_cast<Eigen::Index>(s.covariates.size()));
            double num_factor = std::exp(num.theta.dot(L));
            size_t num_ptr = 0, den_ptr = 0;
            double cum_num = 0.0, cum_den = 0.0;
            for (size_t j = 0; j < grid.times.size(); ++j) {
                double t = grid.times[j];
                while (num_ptr < num.baseline_times.size() && num.baseline_times[num_ptr] <= t) {
                    cum_num += num.baseline_increments[num_ptr] * num_factor;
                    ++num_ptr;
                }
                while (den_ptr < den.baseline_times.size() && den.baseline_times[den_ptr] <= t) {
                    double u = den.baseline_times[den_ptr];
                    cum_den += den.baseline_increments[den_ptr] *
                               std::exp(den.theta.dot(denominator_x(s, models.spec, u)));
                    ++den_ptr;
                }
                double s_den = std::exp(-cum_den);
                if (s_den <= 0.0)
                    throw Error("compute_weights: zero switch-free survival for id " + s.id +
                                " at t=" + std::to_string(t));
                double wij = flavor == WeightFlavor::BaselineOnly
                                 ? 1.0 / s_den
                                 : std::exp(-cum_num) / s_den;
                if (t <= c.follow && wij > opts.max_weight) {
                    if (opts.truncate)
                        wij = opts.max_weight;
                    else
                        throw Error("compute_weights: weight " + std::to_string(wij) + " for id " +
                                    s.id + " at t=" + std::to_string(t) + " exceeds cap");
                }
                w[j] = wij;
            }
        }
        traj.weights.push_back(std::move(w));
    }
    return traj;
}

WeightFn WeightTrajectory::as_weight_fn(const Dataset& d) const {
    std::vector<long> row_of(d.subjects.size(), -1);
    for (size_t r = 0; r < subject_index.size(); ++r) row_of[subject_index[r]] = static_cast<long>(r);
    auto times_copy = times;
    auto weights_copy = weights;
    return [row_of, times_copy, weights_copy](size_t i, double t) {
        long r = row_of[i];
        if (r < 0) return 1.0;
        auto it = std::upper_bound(times_copy.begin(), times_copy.end(), t);
        if (it == times_copy.begin()) return 1.0;
        return weights_copy[static_cast<size_t>(r)][static_cast<size_t>(it - times_copy.begin()) - 1];
    };
}

WeightSummary WeightTrajectory::summary(const Dataset& d) const {
    std::vector<double> vals;
    for (size_t r = 0; r < subject_index.size(); ++r) {
        const auto& s = d.subjects[subject_index[r]];
        double follow = s.switch_time ? *s.switch_time : s.time;
        for (size_t j = 0; j < times.size() && times[j] <= follow; ++j)
            vals.push_back(weights[r][j]);
    }
    WeightSummary sum;
    if (vals.empty()) return sum;
    std::sort(vals.begin(), vals.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(vals.size() - 1);
        size_t lo = static_cast<size_t>(pos);
        size_t hi = std::min(lo + 1, vals.size() - 1);
        return vals[lo] + (pos - static_cast<double>(lo)) * (vals[hi] - vals[lo]);
    };
    sum.min = vals.front();
    sum.max = vals.back();
    sum.q1 = quantile(0.25);
    sum.median = quantile(0.5);
    sum.q3 = quantile(0.75);
    sum.mean = 0.0;
    for (double v : vals) sum.mean += v;
    sum.mean /= static_cast<double>(vals.size());
    return sum;
}

void WeightTrajectory::write_csv(const Dataset& d, const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << "id,time,weight\n";
    char buf[120];
    for (size_t r = 0; r < subject_index.size(); ++r) {
        const auto& s = d.subjects[subject_index[r]];
        double follow = s.switch_time ? *s.switch_time : s.time;
        for (size_t j = 0; j < times.size() && times[j] <= follow; ++j) {
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", s.id.c_str(), times[j],
                          weights[r][j]);
            out << buf;
        }
    }
}

AalenFit ipcw_estimate(const Dataset& d, WeightFlavor flavor, const SwitchModelSpec& spec,
                       const IpcwOptions& opts, double alpha, bool with_ci,
                       WeightTrajectory* out_weights, std::optional<double> pvalue_at,
                       double* out_pvalue_at) {
    Dataset censored = transform_censor_at_switch(d);
    EventGrid grid = event_grid(censored);
    WeightFn wfn;  // unit weights when empty
    if (flavor != WeightFlavor::None) {
        SwitchModels models = fit_switch_models(d, spec);
        if (models.denominator.separation || models.numerator.separation)
            throw Error("ipcw_estimate: switch-time model separation (positivity violation)");
        WeightTrajectory traj = compute_weights(models, d, grid, flavor, opts);
        wfn = traj.as_weight_fn(d);
        if (out_weights) *out_weights = std::move(traj);
    }
    auto fit = aalen_solve(censored, grid, Regressor::Arm, wfn, alpha, with_ci);
    if (pvalue_at && out_pvalue_at)
        *out_pvalue_at = aalen_pvalue_at(censored, grid, Regressor::Arm, *pvalue_at, wfn);
    return fit;
}

}  // namespace switchiv
