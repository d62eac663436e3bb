#pragma once

#include <functional>
#include <string>
#include <vector>

#include "switchiv/dataset.hpp"

namespace switchiv {

// Right-continuous step function: probs[j] holds on [times[j], times[j+1]),
// value 1 before times[0].
struct SurvivalCurve {
    std::vector<double> times;
    std::vector<double> probs;
    std::vector<double> lower, upper;  // optional pointwise bands

    double at(double t) const;
};

struct RiskSetSnapshot {
    double t = 0.0;
    std::vector<std::string> at_risk;  // ids with Y_i(t) = 1
    std::vector<char> y;               // Y_i(t) = I(T_i >= t), per subject
    std::vector<char> dn;              // dN_i(t) = I(T_i = t, event)
};

using SubjectFilter = std::function<bool(const SubjectRecord&)>;
// Weight for subject index i at time t; unit weights when absent.
using WeightFn = std::function<double(size_t, double)>;

RiskSetSnapshot risk_set(const Dataset& d, double t);

SurvivalCurve kaplan_meier(const Dataset& d, const SubjectFilter& filter = {},
                           const WeightFn& weights = {}, bool greenwood_bands = false);

// Pointwise a/b on the merged jump grid; errors where b is zero.
SurvivalCurve curve_ratio(const SurvivalCurve& a, const SurvivalCurve& b);

void write_curve_csv(const SurvivalCurve& c, const std::string& path);

}  // namespace switchiv
