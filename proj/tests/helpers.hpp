#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "switchiv/dataset.hpp"
#include "switchiv/simtrial.hpp"

namespace testutil {

inline switchiv::SubjectRecord subject(const std::string& id, int arm, double time, bool event,
                                       std::optional<double> sw = {},
                                       std::vector<double> covs = {},
                                       std::optional<double> prog = {}) {
    switchiv::SubjectRecord s;
    s.id = id;
    s.arm = arm;
    s.time = time;
    s.event = event;
    s.switch_time = sw;
    s.covariates = std::move(covs);
    s.prog_time = prog;
    return s;
}

// Two arms with identical event times: every estimator should find no effect.
inline switchiv::Dataset mirrored_arms(const std::vector<double>& event_times) {
    switchiv::Dataset d;
    int k = 0;
    for (double t : event_times) {
        d.subjects.push_back(subject("e" + std::to_string(++k), 0, t, true));
        d.subjects.push_back(subject("c" + std::to_string(k), 1, t, true));
    }
    return d;
}

inline std::string write_tmp(const std::string& name, const std::string& content) {
    std::string path = "tmp_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

// Small confounded-crossover generating process used across tests.
inline switchiv::SimConfig small_confounded(size_t n, double beta, std::uint64_t seed) {
    switchiv::SimConfig cfg;
    cfg.n = n;
    cfg.beta = beta;
    cfg.seed = seed;
    cfg.tau_end = 1500;
    cfg.base_hazard = 1.2e-3;
    switchiv::CovariateSpec c1;
    c1.name = "biomarker";
    c1.type = switchiv::CovariateSpec::Type::Bernoulli;
    c1.p = 0.4;
    c1.hazard_coef = 6e-4;
    c1.switch_coef = 0.7;
    switchiv::CovariateSpec c2;
    c2.name = "age_std";
    c2.type = switchiv::CovariateSpec::Type::Uniform;
    c2.lo = 0.0;
    c2.hi = 1.0;
    c2.hazard_coef = 4e-4;
    c2.switch_coef = -0.5;
    cfg.covariates = {c1, c2};
    cfg.frailty_mean = 4e-4;
    cfg.frailty_switch_coef = 0.8;
    cfg.pd_rate = 2e-3;
    cfg.pd_hazard_bump = 5e-4;
    cfg.switch_rule = switchiv::SwitchRule::HazardDriven;
    cfg.switch_rate = 1.2e-3;
    cfg.switch_pd_coef = 1.0;
    cfg.censor_rate = 1.5e-4;
    return cfg;
}

}  // namespace testutil
