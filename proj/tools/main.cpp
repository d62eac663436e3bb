#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchiv/analysis.hpp"
#include "switchiv/ipcw.hpp"
#include "switchiv/ivest.hpp"
#include "switchiv/survival.hpp"

namespace fs = std::filesystem;
using switchiv::Error;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out << text;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t hash_string(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = switchiv::splitmix64(h ^ c);
    return h;
}

// Reproducibility stamp: version, seed in effect, and a hash of the exact
// configuration the run saw.
void write_metadata(const fs::path& dir, const std::string& command,
                    const std::string& config_string, std::optional<std::uint64_t> seed) {
    json j;
    j["version"] = kVersion;
    j["command"] = command;
    if (seed) j["seed"] = *seed;
    j["config_hash"] = hex64(hash_string(config_string));
    write_text(dir / "metadata.json", j.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct CommonOpts {
    std::string input;
    std::string tv_input;
    std::string covariates;     // comma list; empty = all
    std::string tv_covariates;  // comma list; accepted for validation only
    double alpha = 0.05;
    double tau = -1.0;  // < 0 = last follow-up time
    std::string out_dir = ".";
    bool svg = false;
    bool hazard_intercept_only = false;
    bool z_intercept_only = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_input) {
    auto* in = cmd->add_option("--input", o.input, "subject CSV (id,arm,time,event,...)");
    if (need_input) in->required();
    cmd->add_option("--tv-input", o.tv_input, "long CSV of time-varying covariates");
    cmd->add_option("--covariates", o.covariates, "comma list of covariate columns to use");
    cmd->add_option("--tv-covariates", o.tv_covariates, "comma list of time-varying columns");
    cmd->add_option("--alpha", o.alpha, "two-sided test level")->check(CLI::Range(1e-6, 0.5));
    cmd->add_option("--tau", o.tau, "study-end day override");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_flag("--svg", o.svg, "also render SVG plots from the curve CSVs");
    cmd->add_flag("--hazard-intercept-only", o.hazard_intercept_only,
                  "drop covariates from the one-step hazard model");
    cmd->add_flag("--z-intercept-only", o.z_intercept_only,
                  "drop covariates from the one-step arm model");
}

std::string common_config_string(const CommonOpts& o) {
    std::ostringstream ss;
    ss << "input=" << o.input << ";tv=" << o.tv_input << ";cov=" << o.covariates
       << ";tvcov=" << o.tv_covariates << ";alpha=" << o.alpha << ";tau=" << o.tau
       << ";hio=" << o.hazard_intercept_only << ";zio=" << o.z_intercept_only;
    return ss.str();
}

switchiv::Dataset load_dataset(const CommonOpts& o) {
    auto d = switchiv::parse_subjects(o.input);
    if (!o.tv_input.empty()) {
        switchiv::parse_tv_rows(o.tv_input, d);
        auto rep = switchiv::validate(d);
        if (!rep.ok()) {
            std::string msg = "invalid time-varying rows:";
            for (const auto& i : rep.issues) msg += "\n  " + i.id + ": " + i.message;
            throw Error(msg);
        }
        for (const auto& name : split_list(o.tv_covariates)) {
            auto& names = d.tv_covariate_names;
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw UsageError("unknown time-varying covariate: " + name);
        }
    } else if (!o.tv_covariates.empty()) {
        throw UsageError("--tv-covariates requires --tv-input");
    }
    return d;
}

switchiv::MethodOptions method_options(const CommonOpts& o, bool with_ci = true) {
    switchiv::MethodOptions opts;
    opts.alpha = o.alpha;
    opts.with_ci = with_ci;
    if (o.tau > 0) opts.tau = o.tau;
    opts.covariates = split_list(o.covariates);
    return opts;
}

switchiv::MethodSpec method_spec(const std::string& name, const CommonOpts& o) {
    const auto& known = switchiv::method_names();
    if (std::find(known.begin(), known.end(), name) == known.end())
        throw UsageError("unknown method: " + name);
    return {name, o.hazard_intercept_only, o.z_intercept_only};
}

// ---- SVG rendering: draws the step curves already written to CSV ----------

struct NamedCurve {
    std::string label;
    std::string color;
    switchiv::SurvivalCurve curve;
};

std::string svg_step_path(const switchiv::SurvivalCurve& c, double tmax, double w, double h,
                          double mx, double my) {
    auto px = [&](double t) { return mx + (tmax > 0 ? t / tmax : 0.0) * w; };
    auto py = [&](double s) { return my + (1.0 - s) * h; };
    std::ostringstream ss;
    ss << "M" << px(0) << " " << py(1.0);
    double prev = 1.0;
    for (size_t j = 0; j < c.times.size() && c.times[j] <= tmax; ++j) {
        ss << " H" << px(c.times[j]) << " V" << py(c.probs[j]);
        prev = c.probs[j];
    }
    ss << " H" << px(tmax);
    (void)prev;
    return ss.str();
}

void write_svg(const fs::path& path, const std::vector<NamedCurve>& curves, double tmax) {
    const double mx = 60, my = 20, w = 560, h = 340;
    std::ostringstream ss;
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 660 420\">\n"
       << "<rect width=\"660\" height=\"420\" fill=\"white\"/>\n"
       << "<line x1=\"60\" y1=\"360\" x2=\"620\" y2=\"360\" stroke=\"black\"/>\n"
       << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"360\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double s = i / 4.0;
        double y = my + (1.0 - s) * h;
        ss << "<text x=\"52\" y=\"" << y + 4 << "\" font-size=\"12\" text-anchor=\"end\">" << s
           << "</text>\n";
        double t = s * tmax;
        double x = mx + s * w;
        ss << "<text x=\"" << x << "\" y=\"378\" font-size=\"12\" text-anchor=\"middle\">" << t
           << "</text>\n";
    }
    ss << "<text x=\"340\" y=\"402\" font-size=\"13\" text-anchor=\"middle\">days</text>\n";
    double ly = 40;
    for (const auto& nc : curves) {
        ss << "<path d=\"" << svg_step_path(nc.curve, tmax, w, h, mx, my)
           << "\" fill=\"none\" stroke=\"" << nc.color << "\" stroke-width=\"1.5\"/>\n";
        ss << "<line x1=\"440\" y1=\"" << ly << "\" x2=\"470\" y2=\"" << ly << "\" stroke=\""
           << nc.color << "\" stroke-width=\"1.5\"/>\n"
           << "<text x=\"476\" y=\"" << ly + 4 << "\" font-size=\"12\">" << nc.label
           << "</text>\n";
        ly += 18;
    }
    ss << "</svg>\n";
    write_text(path, ss.str());
}

// ---- subcommands -----------------------------------------------------------

int cmd_validate(const CommonOpts& o) {
    auto d = switchiv::parse_subjects(o.input, /*strict=*/false);
    if (!o.tv_input.empty()) switchiv::parse_tv_rows(o.tv_input, d);
    auto rep = switchiv::validate(d);
    json j;
    j["ok"] = rep.ok();
    j["n"] = d.subjects.size();
    j["covariates"] = d.covariate_names;
    auto arr = json::array();
    for (const auto& i : rep.issues) arr.push_back({{"id", i.id}, {"message", i.message}});
    j["issues"] = arr;
    std::cout << j.dump(2) << "\n";
    return rep.ok() ? 0 : 1;
}

void write_km_outputs(const switchiv::Dataset& d, const CommonOpts& o, const fs::path& dir,
                      std::vector<NamedCurve>& curves) {
    auto arm_filter = [](int arm) {
        return [arm](const switchiv::SubjectRecord& s) { return s.arm == arm; };
    };
    auto km_exp = switchiv::kaplan_meier(d, arm_filter(0), {}, true);
    auto km_ctrl = switchiv::kaplan_meier(d, arm_filter(1), {}, true);
    switchiv::write_curve_csv(km_exp, (dir / "km_experimental.csv").string());
    switchiv::write_curve_csv(km_ctrl, (dir / "km_control.csv").string());
    curves.push_back({"experimental arm", "#1b6ca8", km_exp});
    curves.push_back({"control arm", "#c23b22", km_ctrl});
    (void)o;
}

int cmd_analyze(const CommonOpts& o, const std::string& method) {
    auto spec = method_spec(method, o);
    auto d = load_dataset(o);
    fs::create_directories(o.out_dir);
    fs::path dir(o.out_dir);

    auto opts = method_options(o);
    auto res = switchiv::analyze_method(d, spec, opts);
    write_text(dir / "result.json", switchiv::result_to_json(res));

    std::vector<NamedCurve> curves;
    write_km_outputs(d, o, dir, curves);

    if (method == "iv-onestep") {
        switchiv::Dataset dd = d;  // counterfactual curve uses the same covariate subset
        auto grid = switchiv::event_grid(d, opts.tau);
        auto hazard = switchiv::fit_experimental_hazard(d, spec.hazard_intercept_only);
        auto cf = switchiv::counterfactual_control_curve(
            d, grid, res.beta, hazard, std::pair<double, double>{res.ci_lo, res.ci_hi});
        switchiv::write_curve_csv(cf, (dir / "counterfactual_control.csv").string());
        curves.push_back({"control, crossover removed", "#2e8540", cf});
        (void)dd;
    }
    if (method.rfind("ipcw", 0) == 0 && res.weight_summary) {
        switchiv::SwitchModelSpec sm;
        sm.pd_indicator = method != "ipcw-baseline";
        sm.time_since_pd = method == "ipcw-pd-time";
        auto flavor = method == "ipcw-baseline" ? switchiv::WeightFlavor::BaselineOnly
                                                : switchiv::WeightFlavor::Stabilized;
        switchiv::WeightTrajectory traj;
        switchiv::ipcw_estimate(d, flavor, sm, {}, o.alpha, false, &traj);
        traj.write_csv(d, (dir / "weights.csv").string());
    }
    if (o.svg) {
        double tmax = opts.tau.value_or(0.0);
        if (tmax <= 0)
            for (const auto& s : d.subjects) tmax = std::max(tmax, s.time);
        write_svg(dir / "curves.svg", curves, tmax);
    }
    write_metadata(dir, "analyze", common_config_string(o) + ";method=" + method, {});
    std::cout << switchiv::result_to_json(res);
    return 0;
}

std::string format_row(const std::string& method, const switchiv::AnalysisResult* r,
                       const std::string& err, bool csv) {
    char buf[256];
    if (!r) {
        if (csv) return method + ",,,,,failed: " + err + "\n";
        std::snprintf(buf, sizeof(buf), "%-18s %s\n", method.c_str(),
                      ("FAILED: " + err).c_str());
        return buf;
    }
    const auto& rr = r->rr_at.front();
    if (csv) {
        std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%.6g,%.6g,%.4g\n", method.c_str(),
                      r->beta, r->se, rr.rr, rr.lo, rr.hi, r->p);
        return buf;
    }
    std::snprintf(buf, sizeof(buf), "%-18s %11.4g (%.4g) %9.3f [%6.3f, %6.3f] %9.4g\n",
                  method.c_str(), r->beta, r->se, rr.rr, rr.lo, rr.hi, r->p);
    return buf;
}

int cmd_report(const CommonOpts& o, std::vector<std::string> methods) {
    if (methods.empty()) methods = switchiv::method_names();
    std::vector<switchiv::MethodSpec> specs;
    for (const auto& m : methods) specs.push_back(method_spec(m, o));
    auto d = load_dataset(o);
    fs::create_directories(o.out_dir);
    fs::path dir(o.out_dir);
    auto opts = method_options(o);

    // Methods are independent; run them concurrently and collect in order.
    struct RowResult {
        std::optional<switchiv::AnalysisResult> res;
        std::string error;
    };
    std::vector<std::future<RowResult>> futures;
    for (const auto& spec : specs)
        futures.push_back(std::async(std::launch::async, [&, spec]() -> RowResult {
            try {
                return {switchiv::analyze_method(d, spec, opts), ""};
            } catch (const std::exception& e) {
                return {std::nullopt, e.what()};
            }
        }));

    std::string csv = "method,beta,se,rr,rr_lo,rr_hi,p\n";
    std::string txt =
        "method                beta (SE)              RR       95% CI              p\n";
    for (size_t i = 0; i < specs.size(); ++i) {
        auto row = futures[i].get();
        const auto* r = row.res ? &*row.res : nullptr;
        csv += format_row(methods[i], r, row.error, true);
        txt += format_row(methods[i], r, row.error, false);
    }
    write_text(dir / "report.csv", csv);
    write_text(dir / "report.txt", txt);

    std::vector<NamedCurve> curves;
    write_km_outputs(d, o, dir, curves);
    if (o.svg) {
        double tmax = opts.tau.value_or(0.0);
        if (tmax <= 0)
            for (const auto& s : d.subjects) tmax = std::max(tmax, s.time);
        write_svg(dir / "curves.svg", curves, tmax);
    }
    std::string mlist;
    for (const auto& m : methods) mlist += m + ",";
    write_metadata(dir, "report", common_config_string(o) + ";methods=" + mlist, {});
    std::cout << txt;
    return 0;
}

int cmd_simulate(const std::string& config_path, const CommonOpts& o,
                 std::optional<std::uint64_t> seed_override) {
    auto cfg = switchiv::load_sim_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    auto sim = switchiv::generate(cfg);
    fs::create_directories(o.out_dir);
    fs::path dir(o.out_dir);
    switchiv::serialize_subjects(sim.data, (dir / "dataset.csv").string());
    switchiv::export_truth(sim, (dir / "truth.csv").string());
    std::ifstream cf(config_path);
    std::stringstream cfg_text;
    cfg_text << cf.rdbuf();
    write_metadata(dir, "simulate", cfg_text.str() + ";seed=" + std::to_string(cfg.seed),
                   cfg.seed);
    json j;
    j["n"] = sim.data.subjects.size();
    j["seed"] = cfg.seed;
    size_t switched = 0, events = 0;
    for (const auto& s : sim.data.subjects) {
        switched += s.switch_time.has_value();
        events += s.event;
    }
    j["n_events"] = events;
    j["n_switched"] = switched;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_mc(const std::string& config_path, const CommonOpts& o, std::vector<std::string> methods,
           size_t reps, std::optional<std::uint64_t> seed_override) {
    if (methods.empty()) throw UsageError("mc requires at least one --method");
    std::vector<switchiv::MethodSpec> specs;
    for (const auto& m : methods) specs.push_back(method_spec(m, o));
    auto cfg = switchiv::load_sim_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    fs::create_directories(o.out_dir);
    fs::path dir(o.out_dir);

    std::string csv = "method,reps,failures,mean_bias,empirical_sd,mean_se,coverage,rejection\n";
    std::string txt =
        "method               reps fail   mean bias        sd        se  coverage  rejection\n";
    for (const auto& spec : specs) {
        auto s = switchiv::monte_carlo(cfg, spec, reps, o.alpha);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6g,%.6g,%.6g,%.4f,%.4f\n",
                      spec.method.c_str(), s.reps, s.failures, s.mean_bias, s.empirical_sd,
                      s.mean_se, s.coverage, s.rejection);
        csv += buf;
        std::snprintf(buf, sizeof(buf), "%-20s %4zu %4zu %11.4g %9.4g %9.4g %9.4f %10.4f\n",
                      spec.method.c_str(), s.reps, s.failures, s.mean_bias, s.empirical_sd,
                      s.mean_se, s.coverage, s.rejection);
        txt += buf;
    }
    write_text(dir / "mc_summary.csv", csv);
    std::ifstream cf(config_path);
    std::stringstream cfg_text;
    cfg_text << cf.rdbuf();
    write_metadata(dir, "mc",
                   cfg_text.str() + ";seed=" + std::to_string(cfg.seed) +
                       ";reps=" + std::to_string(reps),
                   cfg.seed);
    std::cout << txt;
    return 0;
}

int error_json(const std::string& kind, const std::string& message, int code) {
    json j;
    j["error"] = kind;
    j["message"] = message;
    std::cout << j.dump(2) << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Treatment-effect estimation for trials with treatment switching"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CommonOpts o;
    std::string method;
    std::vector<std::string> methods;
    std::string config_path;
    size_t reps = 100;
    std::optional<std::uint64_t> seed;
    std::uint64_t seed_raw = 0;

    auto* v = app.add_subcommand("validate", "check a dataset and report violations");
    add_common(v, o, true);

    auto* a = app.add_subcommand("analyze", "run one estimation method");
    add_common(a, o, true);
    a->add_option("--method", method, "estimation method")->required();

    auto* r = app.add_subcommand("report", "run several methods, emit a combined table");
    add_common(r, o, true);
    r->add_option("--method", methods, "methods to include (default: all)")->delimiter(',');

    auto* s = app.add_subcommand("simulate", "generate a synthetic trial dataset");
    s->add_option("config", config_path, "JSON simulation config")->required();
    auto* s_seed = s->add_option("--seed", seed_raw, "seed override");
    s->add_option("--out", o.out_dir, "output directory");

    auto* m = app.add_subcommand("mc", "Monte Carlo study over simulated replicates");
    m->add_option("config", config_path, "JSON simulation config")->required();
    m->add_option("--method", methods, "estimators to evaluate")->delimiter(',')->required();
    m->add_option("--reps", reps, "number of replicates")->check(CLI::PositiveNumber);
    auto* m_seed = m->add_option("--seed", seed_raw, "seed override");
    m->add_option("--alpha", o.alpha, "test level");
    m->add_option("--out", o.out_dir, "output directory");
    m->add_flag("--hazard-intercept-only", o.hazard_intercept_only,
                "drop covariates from the one-step hazard model");
    m->add_flag("--z-intercept-only", o.z_intercept_only,
                "drop covariates from the one-step arm model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::ostringstream ss;
        ss << e.what();
        return error_json("usage", ss.str(), 2);
    }

    if (s_seed->count() || m_seed->count()) seed = seed_raw;

    try {
        if (v->parsed()) return cmd_validate(o);
        if (a->parsed()) return cmd_analyze(o, method);
        if (r->parsed()) return cmd_report(o, methods);
        if (s->parsed()) return cmd_simulate(config_path, o, seed);
        if (m->parsed()) return cmd_mc(config_path, o, methods, reps, seed);
    } catch (const UsageError& e) {
        return error_json("usage", e.what(), 2);
    } catch (const Error& e) {
        return error_json("estimation", e.what(), 1);
    } catch (const std::exception& e) {
        return error_json("internal", e.what(), 1);
    }
    return 2;
}
