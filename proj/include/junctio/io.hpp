#pragma once

// File formats: scenario JSON, value-field CSV with a JSON sidecar, junction
// reports, trajectories, convergence studies and run manifests.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "junctio/hjb.hpp"
#include "junctio/junction.hpp"
#include "junctio/model.hpp"
#include "junctio/relay.hpp"
#include "junctio/verify.hpp"

namespace junctio {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// JSON number, or null for non-finite values.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double number_field(const json& obj, const char* key) {
    if (!obj.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
    if (!obj[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return obj[key].get<double>();
}

inline Expr expression_field(const json& obj, const char* key, int id) {
    const std::string where = "branch " + std::to_string(id) + " " + key;
    if (!obj.contains(key) || !obj[key].is_string()) throw ConfigError(where + ": expected an expression string");
    try {
        return Expr::parse(obj[key].get<std::string>());
    } catch (const ParseError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace detail

/// Parses a scenario document:
///   {"branches": [{"id": 1, "dynamics": "a", "cost": "x"}, ...],
///    "controls": [-1, 0, 1], "lambda": 1, "domain_radius": 5, "grid_step": 0.01}
/// Unknown keys are rejected.
inline Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
    detail::reject_unknown(doc, {"branches", "controls", "lambda", "domain_radius", "grid_step"}, "scenario");
    Scenario s;
    if (!doc.contains("branches") || !doc["branches"].is_array()) throw ConfigError("'branches' must be an array");
    for (const auto& b : doc["branches"]) {
        if (!b.is_object()) throw ConfigError("each branch must be an object");
        detail::reject_unknown(b, {"id", "dynamics", "cost"}, "branch");
        if (!b.contains("id") || !b["id"].is_number_integer()) throw ConfigError("branch 'id' must be an integer");
        const int id = b["id"].get<int>();
        s.branches.push_back({id, detail::expression_field(b, "dynamics", id), detail::expression_field(b, "cost", id)});
    }
    if (!doc.contains("controls") || !doc["controls"].is_array()) throw ConfigError("'controls' must be an array");
    std::vector<double> controls;
    for (const auto& a : doc["controls"]) {
        if (!a.is_number()) throw ConfigError("controls must be numbers");
        controls.push_back(a.get<double>());
    }
    s.controls = ControlSet(std::move(controls));
    s.lambda = detail::number_field(doc, "lambda");
    s.domain_radius = detail::number_field(doc, "domain_radius");
    s.grid_step = detail::number_field(doc, "grid_step");
    std::sort(s.branches.begin(), s.branches.end(), [](const BranchSpec& a, const BranchSpec& b) { return a.id < b.id; });
    s.check();
    return s;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

inline json scenario_json(const Scenario& s) {
    json doc;
    doc["branches"] = json::array();
    for (const auto& b : s.branches)
        doc["branches"].push_back({{"id", b.id}, {"dynamics", b.dynamics.source()}, {"cost", b.cost.source()}});
    doc["controls"] = s.controls.values();
    doc["lambda"] = s.lambda;
    doc["domain_radius"] = s.domain_radius;
    doc["grid_step"] = s.grid_step;
    return doc;
}

/// CSV with columns branch, mode, x, value; x is the native coordinate,
/// ascending within each slice.
inline std::string field_csv(const ValueField& f) {
    std::string out = "branch,mode,x,value\n";
    for (const auto& sl : f.slices) {
        const std::size_t n = sl.values.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = sl.orientation < 0 ? n - 1 - i : i;
            const double x = sl.orientation * sl.grid.node(k);
            out += std::to_string(sl.branch) + "," + std::to_string(sl.mode) + "," + fmt(x == 0.0 ? 0.0 : x) + "," +
                   fmt(sl.values[k]) + "\n";
        }
    }
    return out;
}

inline json field_meta_json(const ValueField& f) {
    json m;
    m["kind"] = f.meta.kind;
    m["scenario_hash"] = hex64(f.meta.scenario_hash);
    m["thresholds"] = f.meta.thresholds;
    m["order"] = f.meta.order;
    m["tol"] = f.meta.tol;
    m["iterations"] = f.meta.iterations;
    m["inner_sweeps"] = f.meta.inner_sweeps;
    m["residual"] = f.meta.residual;
    m["tail_bound"] = f.meta.tail_bound;
    m["converged"] = f.meta.converged;
    m["residual_history"] = f.meta.residual_history;
    return m;
}

/// Reads a field CSV written by field_csv. Twofold branch -1 is recognised
/// by its id when the scenario is twofold.
inline ValueField parse_field_csv(const Scenario& s, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("branch,mode,x,value", 0) != 0)
        throw ConfigError("field CSV must start with the header branch,mode,x,value");
    std::map<int, std::vector<std::pair<double, double>>> rows;
    std::map<int, int> modes;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        int branch = 0, mode = 0;
        double x = 0, v = 0;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf%c", &branch, &mode, &x, &v, &extra) < 4)
            throw ConfigError("field CSV line " + std::to_string(lineno) + " is malformed");
        s.index_of(branch);
        rows[branch].emplace_back(s.orientation(branch) * x, v);
        modes[branch] = mode;
    }
    ValueField f;
    f.meta.kind = "imported";
    f.meta.scenario_hash = scenario_hash(s);
    for (const auto& b : s.branches) {
        auto it = rows.find(b.id);
        if (it == rows.end() || it->second.size() < 2)
            throw ConfigError("field CSV lacks nodes for branch " + std::to_string(b.id));
        auto pts = it->second;
        std::sort(pts.begin(), pts.end());
        FieldSlice sl;
        sl.branch = b.id;
        sl.mode = modes[b.id];
        sl.orientation = s.orientation(b.id);
        sl.grid = Grid{pts.front().first, pts.back().first, pts.size() - 1};
        const double h = sl.grid.step();
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (std::fabs(pts[k].first - sl.grid.node(k)) > 1e-6 * std::max(1.0, h))
                throw ConfigError("field CSV nodes of branch " + std::to_string(b.id) + " are not uniform");
            sl.values.push_back(pts[k].second);
        }
        f.slices.push_back(std::move(sl));
    }
    return f;
}

inline json combo_json(const FeasibleCombo& c) {
    json j;
    j["sigma"] = c.sigma;
    j["branches"] = c.branches;
    j["controls"] = c.controls;
    j["weights"] = c.weights;
    j["cycle_cost"] = c.cycle_cost;
    return j;
}

inline json junction_value_json(const JunctionValue& v) {
    json j;
    j["value"] = num(v.value);
    j["feasible"] = v.feasible();
    j["argmin"] = v.argmin ? combo_json(*v.argmin) : json(nullptr);
    j["ties"] = json::array();
    for (const auto& c : v.ties) j["ties"].push_back(combo_json(c));
    return j;
}

inline json junction_report_json(const JunctionReport& r) {
    json j;
    j["mode"] = to_string(r.mode);
    j["v_junction"] = num(r.v_junction);
    j["argmin"] = r.argmin;
    j["ties"] = r.ties;
    j["u0"] = r.u0 ? junction_value_json(*r.u0) : json(nullptr);
    j["u123"] = r.u123 ? junction_value_json(*r.u123) : json(nullptr);
    j["u_pair"] = json::object();
    for (const auto& [tag, v] : r.u_pair) j["u_pair"][tag] = junction_value_json(v);
    j["v_sc"] = json::object();
    for (const auto& [id, v] : r.v_sc) j["v_sc"][std::to_string(id)] = num(v);
    j["ingredients"] = json::array();
    for (const auto& g : r.ingredients)
        j["ingredients"].push_back({{"tag", g.tag}, {"value", num(g.value)}, {"combo", g.combo ? combo_json(*g.combo) : json(nullptr)}});
    return j;
}

/// CSV with columns t, x, mode, control, running_cost, switched.
inline std::string trajectory_csv(const TrajectoryRecord& r) {
    std::string out = "t,x,mode,control,running_cost,switched\n";
    for (const auto& smp : r.samples)
        out += fmt(smp.t) + "," + fmt(smp.x) + "," + std::to_string(smp.mode) + "," + fmt(smp.control) + "," +
               fmt(smp.running_cost) + "," + (smp.switched ? "1" : "0") + "\n";
    return out;
}

inline json trajectory_json(const TrajectoryRecord& r) {
    json j;
    j["discounted_cost"] = r.discounted_cost;
    j["horizon"] = r.horizon;
    j["final_state"] = {{"mode", r.final_state.mode}, {"x", r.final_state.x}};
    j["switch_events"] = json::array();
    for (const auto& e : r.switch_events)
        j["switch_events"].push_back({{"t", e.t}, {"from_mode", e.from_mode}, {"to_mode", e.to_mode},
                                      {"x_before", e.x_before}, {"x_after", e.x_after}});
    return j;
}

/// CSV with columns epsilon, sup_error, junction_gap.
inline std::string study_csv(const ConvergenceStudy& st) {
    std::string out = "epsilon,sup_error,junction_gap\n";
    for (std::size_t k = 0; k < st.epsilons.size(); ++k)
        out += fmt(st.epsilons[k]) + "," + fmt(st.sup_errors[k]) + "," + fmt(st.junction_gaps[k]) + "\n";
    return out;
}

inline json study_json(const ConvergenceStudy& st) {
    json j;
    j["family"] = st.family;
    j["epsilons"] = st.epsilons;
    j["sup_errors"] = st.sup_errors;
    j["junction_gaps"] = st.junction_gaps;
    j["empirical_order"] = st.empirical_order;
    j["limit_value"] = num(st.limit_value);
    j["limit_argmin"] = st.limit_tag;
    j["rate_constant"] = num(st.rate_constant);
    j["grid_step"] = st.grid_step;
    json jv = json::array();
    for (const auto& row : st.junction_values) {
        json r = json::object();
        for (const auto& [id, v] : row) r[std::to_string(id)] = v;
        jv.push_back(r);
    }
    j["junction_values"] = jv;
    bool within = std::all_of(st.within_bound.begin(), st.within_bound.end(), [](bool b) { return b; });
    j["verdicts"] = {{"sup_errors_decreasing", st.errors_decreasing()},
                     {"junction_gap_decreasing", st.gaps_decreasing()},
                     {"junction_within_rate_bound", within}};
    return j;
}

inline json residual_json(const ResidualReport& r) {
    json j;
    json per = json::object();
    for (const auto& [id, v] : r.interior_residuals) per[std::to_string(id)] = v;
    j["interior_residuals"] = per;
    j["interior_max"] = r.interior_max;
    j["worst_branch"] = r.worst_branch;
    j["worst_x"] = r.worst_x;
    json jt = json::object();
    for (const auto& [id, v] : r.junction_terms) jt[std::to_string(id)] = v;
    j["junction_terms"] = jt;
    j["junction_min"] = num(r.junction_min);
    j["junction_max"] = num(r.junction_max);
    j["tolerance"] = r.tolerance;
    j["interior_ok"] = r.interior_ok();
    j["ishii_ok"] = r.ishii_ok();
    return j;
}

inline json maximal_json(const MaximalSubsolutionReport& m) {
    json j;
    j["tolerance"] = m.tolerance;
    j["subsolutions"] = m.subsolutions;
    j["recipes_represented"] = m.recipes_represented;
    j["all_below"] = m.all_below;
    j["reference_attained"] = m.reference_attained;
    j["candidates"] = json::array();
    for (const auto& v : m.verdicts)
        j["candidates"].push_back({{"recipe", v.recipe},
                                   {"label", v.label},
                                   {"subsolution", v.subsolution.ok},
                                   {"excluded_because", v.subsolution.ok ? json(nullptr) : json(v.subsolution.reason)},
                                   {"junction_value", v.junction_value},
                                   {"max_excess", v.max_excess},
                                   {"below", v.below}});
    return j;
}

/// Record of one CLI run. The timestamp lives here and nowhere else.
struct RunManifest {
    std::string command;
    std::string scenario_path;
    std::string scenario_hash;  // FNV-1a of the input bytes
    json parameters = json::object();
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;
    std::string version;
    std::string timestamp;

    json to_json() const {
        return {{"command", command},     {"scenario", {{"path", scenario_path}, {"hash", scenario_hash}}},
                {"parameters", parameters}, {"outputs", outputs},
                {"wall_seconds", wall_seconds}, {"version", version},
                {"timestamp", timestamp}};
    }
};

}  // namespace junctio
