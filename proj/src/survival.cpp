#include "switchiv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace switchiv {

double SurvivalCurve::at(double t) const {
    // last jump time <= t
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probs[static_cast<size_t>(it - times.begin()) - 1];
}

RiskSetSnapshot risk_set(const Dataset& d, double t) {
    if (t < 0) throw Error("risk_set: negative time");
    RiskSetSnapshot snap;
    snap.t = t;
    for (const auto& s : d.subjects) {
        bool y = s.time >= t;
        snap.y.push_back(y ? 1 : 0);
        snap.dn.push_back((s.event && s.time == t) ? 1 : 0);
        if (y) snap.at_risk.push_back(s.id);
    }
    return snap;
}

SurvivalCurve kaplan_meier(const Dataset& d, const SubjectFilter& filter,
                           const WeightFn& weights, bool greenwood_bands) {
    std::vector<size_t> group;
    for (size_t i = 0; i < d.subjects.size(); ++i)
        if (!filter || filter(d.subjects[i])) group.push_back(i);
    if (group.empty()) throw Error("kaplan_meier: empty group");

    std::vector<double> times;
    for (size_t i : group)
        if (d.subjects[i].event) times.push_back(d.subjects[i].time);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    SurvivalCurve c;
    double surv = 1.0;
    double greenwood_sum = 0.0;
    for (double t : times) {
        double n_w = 0.0, d_w = 0.0;
        for (size_t i : group) {
            const auto& s = d.subjects[i];
            if (s.time < t) continue;
            double w = weights ? weights(i, t) : 1.0;
            n_w += w;
            if (s.event && s.time == t) d_w += w;
        }
        if (n_w <= 0.0) break;
        surv *= 1.0 - d_w / n_w;
        c.times.push_back(t);
        c.probs.push_back(surv);
        if (greenwood_bands) {
            if (n_w > d_w) greenwood_sum += d_w / (n_w * (n_w - d_w));
            double sd = surv * std::sqrt(greenwood_sum);
            c.lower.push_back(std::max(0.0, surv - 1.96 * sd));
            c.upper.push_back(std::min(1.0, surv + 1.96 * sd));
        }
    }
    return c;
}

SurvivalCurve curve_ratio(const SurvivalCurve& a, const SurvivalCurve& b) {
    std::vector<double> grid;
    grid.reserve(a.times.size() + b.times.size());
    grid.insert(grid.end(), a.times.begin(), a.times.end());
    grid.insert(grid.end(), b.times.begin(), b.times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    SurvivalCurve r;
    for (double t : grid) {
        double denom = b.at(t);
        if (denom <= 0.0) throw Error("curve_ratio: division by zero survival at t=" + std::to_string(t));
        r.times.push_back(t);
        r.probs.push_back(a.at(t) / denom);
    }
    return r;
}

void write_curve_csv(const SurvivalCurve& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << "time,survival,lower,upper\n";
    char buf[160];
    for (size_t j = 0; j < c.times.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", c.times[j], c.probs[j]);
        out << buf;
        if (j < c.lower.size()) {
            std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", c.lower[j], c.upper[j]);
            out << buf;
        } else {
            out << ",,";
        }
        out << "\n";
    }
}

}  // namespace switchiv
