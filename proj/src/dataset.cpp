#include "switchiv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace switchiv {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& cell, const std::string& col, const std::string& id) {
    try {
        size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw Error("non-numeric cell '" + cell + "' in column " + col +
                    (id.empty() ? "" : " (id " + id + ")"));
    }
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw Error("empty file: " + path);
    return lines;
}

}  // namespace

Dataset parse_subjects(const std::string& path, bool strict) {
    auto lines = read_lines(path);
    auto header = split_csv_line(lines[0]);

    auto col_of = [&](const std::string& name) -> int {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    int c_id = col_of("id"), c_arm = col_of("arm"), c_time = col_of("time"), c_event = col_of("event");
    for (auto [idx, name] : {std::pair{c_id, "id"}, {c_arm, "arm"}, {c_time, "time"}, {c_event, "event"}})
        if (idx < 0) throw Error(std::string("missing required column: ") + name);
    int c_switch = col_of("switch_time");
    int c_prog = col_of("prog_time");

    Dataset d;
    std::vector<int> cov_cols;
    for (size_t i = 0; i < header.size(); ++i) {
        int ii = static_cast<int>(i);
        if (ii == c_id || ii == c_arm || ii == c_time || ii == c_event || ii == c_switch || ii == c_prog)
            continue;
        cov_cols.push_back(ii);
        d.covariate_names.push_back(header[i]);
    }

    for (size_t li = 1; li < lines.size(); ++li) {
        auto cells = split_csv_line(lines[li]);
        if (cells.size() != header.size())
            throw Error("row " + std::to_string(li) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(header.size()));
        SubjectRecord s;
        s.id = cells[c_id];
        s.arm = static_cast<int>(parse_number(cells[c_arm], "arm", s.id));
        s.time = parse_number(cells[c_time], "time", s.id);
        s.event = parse_number(cells[c_event], "event", s.id) != 0.0;
        if (c_switch >= 0 && !cells[c_switch].empty())
            s.switch_time = parse_number(cells[c_switch], "switch_time", s.id);
        if (c_prog >= 0 && !cells[c_prog].empty())
            s.prog_time = parse_number(cells[c_prog], "prog_time", s.id);
        for (int cc : cov_cols) {
            if (cells[cc].empty()) throw Error("missing covariate cell for id " + s.id);
            s.covariates.push_back(parse_number(cells[cc], header[cc], s.id));
        }
        d.subjects.push_back(std::move(s));
    }

    auto report = validate(d);
    if (strict && !report.ok()) {
        std::string msg = "invalid dataset:";
        for (const auto& issue : report.issues) msg += "\n  " + issue.id + ": " + issue.message;
        throw Error(msg);
    }
    return d;
}

void parse_tv_rows(const std::string& path, Dataset& d) {
    auto lines = read_lines(path);
    auto header = split_csv_line(lines[0]);
    if (header.size() < 4 || header[0] != "id" || header[1] != "start" || header[2] != "stop")
        throw Error("tv file must have columns id,start,stop,<values...>");
    d.tv_covariate_names.assign(header.begin() + 3, header.end());
    for (size_t li = 1; li < lines.size(); ++li) {
        auto cells = split_csv_line(lines[li]);
        if (cells.size() != header.size()) throw Error("tv row " + std::to_string(li) + ": wrong cell count");
        TimeVaryingCovariateRow row;
        row.id = cells[0];
        row.start = parse_number(cells[1], "start", row.id);
        row.stop = parse_number(cells[2], "stop", row.id);
        for (size_t i = 3; i < cells.size(); ++i)
            row.values.push_back(parse_number(cells[i], header[i], row.id));
        d.tv_rows.push_back(std::move(row));
    }
}

std::string serialize_subjects_string(const Dataset& d) {
    std::string out = "id,arm,time,event,switch_time,prog_time";
    for (const auto& name : d.covariate_names) out += "," + name;
    out += "\n";
    for (const auto& s : d.subjects) {
        out += s.id + "," + std::to_string(s.arm) + "," + format_number(s.time) + "," +
               (s.event ? "1" : "0") + ",";
        if (s.switch_time) out += format_number(*s.switch_time);
        out += ",";
        if (s.prog_time) out += format_number(*s.prog_time);
        for (double v : s.covariates) out += "," + format_number(v);
        out += "\n";
    }
    return out;
}

void serialize_subjects(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << serialize_subjects_string(d);
}

ValidationReport validate(const Dataset& d) {
    ValidationReport rep;
    std::set<std::string> ids;
    size_t cov_len = d.subjects.empty() ? 0 : d.subjects.front().covariates.size();
    for (const auto& s : d.subjects) {
        if (!ids.insert(s.id).second) rep.issues.push_back({s.id, "duplicate id"});
        if (s.arm != 0 && s.arm != 1) rep.issues.push_back({s.id, "arm must be 0 or 1"});
        if (s.time < 0) rep.issues.push_back({s.id, "negative follow-up time"});
        if (s.switch_time) {
            if (s.arm != 1)
                rep.issues.push_back({s.id, "experimental-arm subject with switch_time"});
            if (*s.switch_time < 0)
                rep.issues.push_back({s.id, "negative switch_time"});
            if (*s.switch_time > s.time)
                rep.issues.push_back({s.id, "switch after end of follow-up"});
        }
        if (s.covariates.size() != cov_len)
            rep.issues.push_back({s.id, "covariate vector length differs across subjects"});
        if (s.prog_time && *s.prog_time < 0) rep.issues.push_back({s.id, "negative prog_time"});
    }
    for (const auto& row : d.tv_rows) {
        if (!ids.count(row.id)) rep.issues.push_back({row.id, "tv row for unknown subject"});
        if (!(row.start < row.stop)) rep.issues.push_back({row.id, "tv row with start >= stop"});
    }
    return rep;
}

double treatment_at(const SubjectRecord& s, double t) {
    if (s.arm == 0) return 0.0;
    if (s.switch_time && t >= *s.switch_time) return 0.0;
    return 1.0;
}

double cumulative_exposure(const SubjectRecord& s, double t) {
    if (s.arm == 0) return 0.0;
    if (s.switch_time) return std::min(t, *s.switch_time);
    return t;
}

EventGrid event_grid(const Dataset& d, std::optional<double> tau_end) {
    EventGrid g;
    double max_t = 0.0;
    for (const auto& s : d.subjects) {
        max_t = std::max(max_t, s.time);
        if (s.event) g.times.push_back(s.time);
    }
    if (g.times.empty()) throw Error("no events in dataset");
    std::sort(g.times.begin(), g.times.end());
    g.times.erase(std::unique(g.times.begin(), g.times.end()), g.times.end());
    g.tau_end = tau_end.value_or(max_t);
    if (g.tau_end < g.times.back())
        throw Error("tau_end precedes the last observed event time");
    return g;
}

}  // namespace switchiv
