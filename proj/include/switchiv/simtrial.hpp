#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "switchiv/dataset.hpp"

namespace switchiv {

struct CovariateSpec {
    std::string name;
    enum class Type { Bernoulli, Uniform } type = Type::Bernoulli;
    double p = 0.5;             // Bernoulli success probability
    double lo = 0.0, hi = 1.0;  // Uniform support
    double hazard_coef = 0.0;   // effect on the death hazard
    double switch_coef = 0.0;   // log-rate effect on the switch hazard
    double censor_coef = 0.0;   // log-rate effect on censoring
    double pd_coef = 0.0;       // log-rate effect on progression
    double assign_coef = 0.0;   // log-odds effect on arm assignment, if enabled
};

enum class HazardForm { Additive, Multiplicative };
enum class SwitchRule { Never, AtProgression, HazardDriven };

// Death hazard while untreated (control path):
//   Additive:       a0 + sum(hazard_coef * L) + G + pd_bump * I(t >= P)
//   Multiplicative: a0 * exp(sum(hazard_coef * L) + pd_bump * I(t >= P)) + G
// Taking experimental treatment lowers the hazard by beta at that instant.
struct SimConfig {
    size_t n = 1000;
    double beta = 0.0;  // per day; > 0 means experimental protective
    std::uint64_t seed = 1;
    double tau_end = 1500.0;
    HazardForm hazard_form = HazardForm::Additive;
    double base_hazard = 1e-3;  // a0, per day
    std::vector<CovariateSpec> covariates;
    double frailty_mean = 0.0;        // exponential frailty, additive on the hazard
    double frailty_switch_coef = 0.0; // multiplicative on the switch rate via exp(coef * G / mean)
    double pd_rate = 0.0;             // progression hazard, per day
    double pd_hazard_bump = 0.0;      // death-hazard change after progression
    SwitchRule switch_rule = SwitchRule::Never;
    double switch_prob = 1.0;    // AtProgression: probability of switching at P
    double switch_rate = 0.0;    // HazardDriven: baseline switch hazard per day
    double switch_pd_coef = 0.0; // HazardDriven: log-rate bump after progression
    double censor_rate = 0.0;    // exponential dropout hazard; 0 = administrative only
    bool covariate_dependent_assignment = false;  // P(Z=1|L) = expit(sum assign_coef * L)
    bool round_days = false;     // ceil all recorded times to whole days
};

struct SimulatedSubject {
    double t0 = 0.0;          // counterfactual death time, always experimental
    double t1 = 0.0;          // counterfactual death time, never experimental
    double frailty = 0.0;
    double uncensored = 0.0;  // realized death time before censoring
};

struct SimOutput {
    Dataset data;
    std::vector<SimulatedSubject> truth;
};

SimOutput generate(const SimConfig& cfg);

SimConfig load_sim_config(const std::string& path);
void export_truth(const SimOutput& sim, const std::string& path);
std::string truth_csv_string(const SimOutput& sim);

}  // namespace switchiv
