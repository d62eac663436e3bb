#pragma once

#include <string>
#include <vector>

#include "switchiv/aalen.hpp"
#include "switchiv/cox.hpp"
#include "switchiv/dataset.hpp"

namespace switchiv {

// Traditional transforms of the crossover problem.
Dataset transform_exclude_switchers(const Dataset& d);
Dataset transform_censor_at_switch(const Dataset& d);

struct SwitchModelSpec {
    bool pd_indicator = false;   // I(t >= progression_time) in the denominator
    bool time_since_pd = false;  // (t - progression_time) I(t >= progression_time)
};

struct SwitchModels {
    CoxFit numerator;    // switch time ~ L (baseline only)
    CoxFit denominator;  // switch time ~ L + X(t)
    SwitchModelSpec spec;
    std::vector<double> event_times;  // switch event times, ascending
};

// Crossover-time Cox models fitted on the control arm, switch as the event.
SwitchModels fit_switch_models(const Dataset& d, const SwitchModelSpec& spec);

enum class WeightFlavor { None, BaselineOnly, Stabilized };

struct WeightSummary {
    double min = 1, q1 = 1, median = 1, mean = 1, q3 = 1, max = 1;
};

struct WeightTrajectory {
    std::vector<double> times;                 // death-event grid times
    std::vector<size_t> subject_index;         // control subjects, dataset order
    std::vector<std::vector<double>> weights;  // per control subject x grid time
    WeightFlavor flavor = WeightFlavor::None;

    // Weight for any subject index at time t (1 for the experimental arm).
    WeightFn as_weight_fn(const Dataset& d) const;
    WeightSummary summary(const Dataset& d) const;  // over at-risk subject-times
    void write_csv(const Dataset& d, const std::string& path) const;
};

struct IpcwOptions {
    double max_weight = 50.0;  // error above this unless truncate is set
    bool truncate = false;
};

WeightTrajectory compute_weights(const SwitchModels& models, const Dataset& d,
                                 const EventGrid& grid, WeightFlavor flavor,
                                 const IpcwOptions& opts = {});

// Censor-at-switch transform followed by the weighted additive-hazards solve.
AalenFit ipcw_estimate(const Dataset& d, WeightFlavor flavor, const SwitchModelSpec& spec,
                       const IpcwOptions& opts = {}, double alpha = 0.05, bool with_ci = true,
                       WeightTrajectory* out_weights = nullptr,
                       std::optional<double> pvalue_at = {}, double* out_pvalue_at = nullptr);

}  // namespace switchiv
