#include "switchiv/simtrial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "switchiv/logistic.hpp"

namespace switchiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SubjectRng {
    std::mt19937_64 gen;
    explicit SubjectRng(std::uint64_t seed) : gen(seed) {}
    double uniform() {
        double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }
    double exponential() { return -std::log(uniform()); }
};

// Solve for T with cumulative hazard E under a piecewise-constant hazard that
// changes at the (finite) breakpoints.
double invert_hazard(double target, const std::vector<double>& breaks,
                     const std::function<double(double)>& rate_at) {
    double t = 0.0, rem = target;
    for (double b : breaks) {
        if (!(b > t)) continue;
        double r = rate_at(t);
        if (r <= 0.0) throw Error("generate: non-positive hazard encountered");
        double mass = r * (b - t);
        if (rem <= mass) return t + rem / r;
        rem -= mass;
        t = b;
    }
    double r = rate_at(t);
    if (r <= 0.0) throw Error("generate: non-positive hazard encountered");
    return t + rem / r;
}

void validate_config(const SimConfig& cfg) {
    if (cfg.n == 0) throw Error("sim config: n must be positive");
    if (cfg.tau_end <= 0) throw Error("sim config: tau_end must be positive");
    double lin_min = 0.0;
    for (const auto& c : cfg.covariates) {
        double lo = c.type == CovariateSpec::Type::Bernoulli ? 0.0 : c.lo;
        double hi = c.type == CovariateSpec::Type::Bernoulli ? 1.0 : c.hi;
        lin_min += std::min(c.hazard_coef * lo, c.hazard_coef * hi);
    }
    double min_base;
    if (cfg.hazard_form == HazardForm::Additive)
        min_base = cfg.base_hazard + lin_min + std::min(0.0, cfg.pd_hazard_bump);
    else
        min_base = cfg.base_hazard * std::exp(lin_min + std::min(0.0, cfg.pd_hazard_bump));
    if (min_base - std::max(cfg.beta, 0.0) <= 0.0)
        throw Error("sim config: hazard can reach zero or below for some covariate value");
}

}  // namespace

SimOutput generate(const SimConfig& cfg) {
    validate_config(cfg);
    SimOutput out;
    for (const auto& c : cfg.covariates) out.data.covariate_names.push_back(c.name);
    out.data.subjects.reserve(cfg.n);
    out.truth.reserve(cfg.n);

    for (size_t i = 0; i < cfg.n; ++i) {
        SubjectRng rng(derive_seed(cfg.seed, i));
        SubjectRecord s;
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "s%06zu", i + 1);
        s.id = idbuf;

        double lin_haz = 0.0, lin_sw = 0.0, lin_cens = 0.0, lin_pd = 0.0, lin_assign = 0.0;
        for (const auto& c : cfg.covariates) {
            double v = c.type == CovariateSpec::Type::Bernoulli
                           ? (rng.uniform() < c.p ? 1.0 : 0.0)
                           : c.lo + (c.hi - c.lo) * rng.uniform();
            s.covariates.push_back(v);
            lin_haz += c.hazard_coef * v;
            lin_sw += c.switch_coef * v;
            lin_cens += c.censor_coef * v;
            lin_pd += c.pd_coef * v;
            lin_assign += c.assign_coef * v;
        }

        double u_assign = rng.uniform();
        s.arm = (cfg.covariate_dependent_assignment ? u_assign < expit(lin_assign)
                                                    : u_assign < 0.5)
                    ? 1
                    : 0;

        double frailty = cfg.frailty_mean > 0.0 ? cfg.frailty_mean * rng.exponential() : 0.0;

        double pd_rate = cfg.pd_rate * std::exp(lin_pd);
        double u_pd = rng.exponential();
        double prog = pd_rate > 0.0 ? u_pd / pd_rate : kInf;

        // Latent switch time; only control subjects can act on it.
        double sw = kInf;
        double u_sw1 = rng.uniform(), u_sw2 = rng.exponential();
        if (cfg.switch_rule == SwitchRule::AtProgression) {
            if (u_sw1 < cfg.switch_prob) sw = prog;
        } else if (cfg.switch_rule == SwitchRule::HazardDriven && cfg.switch_rate > 0.0) {
            double fr_term = cfg.frailty_mean > 0.0
                                 ? cfg.frailty_switch_coef * (frailty / cfg.frailty_mean)
                                 : 0.0;
            double rate1 = cfg.switch_rate * std::exp(lin_sw + fr_term);
            double rate2 = rate1 * std::exp(cfg.switch_pd_coef);
            if (std::isfinite(prog) && u_sw2 > rate1 * prog)
                sw = prog + (u_sw2 - rate1 * prog) / rate2;
            else
                sw = u_sw2 / rate1;
        }

        // Untreated (control-path) death hazard before/after progression.
        double b1, b2;
        if (cfg.hazard_form == HazardForm::Additive) {
            b1 = cfg.base_hazard + lin_haz + frailty;
            b2 = b1 + cfg.pd_hazard_bump;
        } else {
            b1 = cfg.base_hazard * std::exp(lin_haz) + frailty;
            b2 = cfg.base_hazard * std::exp(lin_haz + cfg.pd_hazard_bump) + frailty;
        }
        auto base_rate = [&](double t) { return std::isfinite(prog) && t >= prog ? b2 : b1; };
        std::vector<double> breaks;
        if (std::isfinite(prog)) breaks.push_back(prog);

        double e_death = rng.exponential();
        SimulatedSubject truth;
        truth.frailty = frailty;
        truth.t1 = invert_hazard(e_death, breaks, [&](double t) { return base_rate(t); });
        truth.t0 = invert_hazard(e_death, breaks, [&](double t) { return base_rate(t) - cfg.beta; });

        double t_real;
        if (s.arm == 0) {
            t_real = truth.t0;
        } else if (!std::isfinite(sw)) {
            t_real = truth.t1;
        } else {
            std::vector<double> rbreaks = breaks;
            rbreaks.push_back(sw);
            std::sort(rbreaks.begin(), rbreaks.end());
            t_real = invert_hazard(e_death, rbreaks, [&](double t) {
                return base_rate(t) - (t >= sw ? cfg.beta : 0.0);
            });
        }
        truth.uncensored = t_real;

        double u_cens = rng.exponential();
        double censor = cfg.tau_end;
        if (cfg.censor_rate > 0.0) {
            double c_rate = cfg.censor_rate * std::exp(lin_cens);
            censor = std::min(censor, u_cens / c_rate);
        }

        s.time = std::min(t_real, censor);
        s.event = t_real <= censor;
        if (s.arm == 1 && sw <= s.time) s.switch_time = sw;
        if (std::isfinite(prog) && prog <= s.time) s.prog_time = prog;

        if (cfg.round_days) {
            auto up = [](double x) { return std::max(1.0, std::ceil(x)); };
            s.time = up(s.time);
            if (s.switch_time) s.switch_time = up(*s.switch_time);
            if (s.prog_time) s.prog_time = up(*s.prog_time);
            truth.t0 = up(truth.t0);
            truth.t1 = up(truth.t1);
            truth.uncensored = up(truth.uncensored);
        }

        out.data.subjects.push_back(std::move(s));
        out.truth.push_back(truth);
    }
    return out;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(std::string("config parse error: ") + e.what());
    }
    SimConfig cfg;
    cfg.n = j.value("n", cfg.n);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.tau_end = j.value("tau_end", cfg.tau_end);
    std::string form = j.value("hazard_form", "additive");
    if (form == "additive")
        cfg.hazard_form = HazardForm::Additive;
    else if (form == "multiplicative")
        cfg.hazard_form = HazardForm::Multiplicative;
    else
        throw Error("config: unknown hazard_form " + form);
    cfg.base_hazard = j.value("base_hazard", cfg.base_hazard);
    if (j.contains("covariates")) {
        for (const auto& cj : j["covariates"]) {
            CovariateSpec c;
            c.name = cj.value("name", "l" + std::to_string(cfg.covariates.size() + 1));
            std::string type = cj.value("type", "bernoulli");
            if (type == "bernoulli")
                c.type = CovariateSpec::Type::Bernoulli;
            else if (type == "uniform")
                c.type = CovariateSpec::Type::Uniform;
            else
                throw Error("config: unknown covariate type " + type);
            c.p = cj.value("p", c.p);
            c.lo = cj.value("lo", c.lo);
            c.hi = cj.value("hi", c.hi);
            c.hazard_coef = cj.value("hazard_coef", 0.0);
            c.switch_coef = cj.value("switch_coef", 0.0);
            c.censor_coef = cj.value("censor_coef", 0.0);
            c.pd_coef = cj.value("pd_coef", 0.0);
            c.assign_coef = cj.value("assign_coef", 0.0);
            cfg.covariates.push_back(std::move(c));
        }
    }
    cfg.frailty_mean = j.value("frailty_mean", cfg.frailty_mean);
    cfg.frailty_switch_coef = j.value("frailty_switch_coef", cfg.frailty_switch_coef);
    cfg.pd_rate = j.value("pd_rate", cfg.pd_rate);
    cfg.pd_hazard_bump = j.value("pd_hazard_bump", cfg.pd_hazard_bump);
    std::string rule = j.value("switch_rule", "never");
    if (rule == "never")
        cfg.switch_rule = SwitchRule::Never;
    else if (rule == "at-progression")
        cfg.switch_rule = SwitchRule::AtProgression;
    else if (rule == "hazard")
        cfg.switch_rule = SwitchRule::HazardDriven;
    else
        throw Error("config: unknown switch_rule " + rule);
    cfg.switch_prob = j.value("switch_prob", cfg.switch_prob);
    cfg.switch_rate = j.value("switch_rate", cfg.switch_rate);
    cfg.switch_pd_coef = j.value("switch_pd_coef", cfg.switch_pd_coef);
    cfg.censor_rate = j.value("censor_rate", cfg.censor_rate);
    cfg.covariate_dependent_assignment =
        j.value("covariate_dependent_assignment", cfg.covariate_dependent_assignment);
    cfg.round_days = j.value("round_days", cfg.round_days);
    validate_config(cfg);
    return cfg;
}

std::string truth_csv_string(const SimOutput& sim) {
    std::string out = "id,t0,t1,frailty,uncensored\n";
    char buf[160];
    for (size_t i = 0; i < sim.truth.size(); ++i) {
        const auto& t = sim.truth[i];
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n",
                      sim.data.subjects[i].id.c_str(), t.t0, t.t1, t.frailty, t.uncensored);
        out += buf;
    }
    return out;
}

void export_truth(const SimOutput& sim, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << truth_csv_string(sim);
}

}  // namespace switchiv
