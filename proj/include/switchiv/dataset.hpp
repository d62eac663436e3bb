#pragma once

#include <optional>
#include <string>
#include <vector>

#include "switchiv/common.hpp"

namespace switchiv {

// One trial participant. arm = 1 is the control arm; control subjects may
// switch to experimental treatment at switch_time (at most once, irreversible).
struct SubjectRecord {
    std::string id;
    int arm = 0;                        // 1 = control, 0 = experimental
    double time = 0.0;                  // follow-up end, days
    bool event = false;                 // 1 = death observed at `time`
    std::optional<double> switch_time;  // crossover day; absent = never switched
    std::vector<double> covariates;     // baseline covariates, shared schema
    std::optional<double> prog_time;    // observed progression day, if any
};

struct TimeVaryingCovariateRow {
    std::string id;
    double start = 0.0;
    double stop = 0.0;
    std::vector<double> values;
};

struct Dataset {
    std::vector<SubjectRecord> subjects;
    std::vector<TimeVaryingCovariateRow> tv_rows;
    std::vector<std::string> covariate_names;
    std::vector<std::string> tv_covariate_names;
};

struct ValidationIssue {
    std::string id;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Distinct observed event times tau_1 < ... < tau_k plus the study end tau.
struct EventGrid {
    std::vector<double> times;
    double tau_end = 0.0;
};

// Wide CSV: id,arm,time,event,switch_time,prog_time,<covariates...>
// (switch_time/prog_time columns optional; empty cell = absent).
// strict = throw when validate() finds issues; pass false to inspect them.
Dataset parse_subjects(const std::string& path, bool strict = true);
// Long CSV: id,start,stop,<tv columns...>; appended to an existing dataset.
void parse_tv_rows(const std::string& path, Dataset& d);
void serialize_subjects(const Dataset& d, const std::string& path);
std::string serialize_subjects_string(const Dataset& d);

ValidationReport validate(const Dataset& d);

// D(t): 1 while on control treatment, 0 on experimental; right-continuous,
// dropping 1 -> 0 at the switch time.
double treatment_at(const SubjectRecord& s, double t);

// Integral of D over [0, t]: 0 for experimental, min(t, S) for switchers,
// t for never-switched control subjects.
double cumulative_exposure(const SubjectRecord& s, double t);

EventGrid event_grid(const Dataset& d, std::optional<double> tau_end = {});

}  // namespace switchiv
