#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "junctio/junctio.hpp"

#ifndef JUNCTIO_VERSION
#define JUNCTIO_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace junctio;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNonConvergence = 2;
constexpr int kExitVerifyFailed = 3;

struct Common {
    std::string scenario;
    std::string out = ".";
    double tol = 1e-9;
};

std::vector<double> split_numbers(const std::string& text, char sep) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + item + "'");
        }
        if (used != item.size()) throw ConfigError("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

/// "1.5" -> every branch; "2,1,1" -> one threshold per branch; an optional
/// family raises entries to its powers when a single value is given.
ThermostatConfig make_config(const Scenario& s, const std::vector<double>& eps, const std::string& family,
                             const std::vector<int>& order) {
    if (eps.empty()) throw ConfigError("--epsilon is required");
    ThermostatConfig cfg;
    if (eps.size() == 1) {
        cfg = ThresholdFamily::parse(s, family).at(s, eps[0]);
    } else {
        if (eps.size() != s.branches.size()) throw ConfigError("--epsilon needs one value or one per branch");
        cfg = ThermostatConfig::uniform(s, 1.0);
        cfg.thresholds = eps;
    }
    if (!order.empty()) cfg.order = order;
    cfg.check(s);
    return cfg;
}

/// Schedule syntax: segments separated by ';', each "duration:controls"
/// where duration is a number or "inf" and controls is a single value or
/// per-branch assignments "id=value/id=value".
ControlSchedule parse_policy(const Scenario& s, const std::string& text) {
    std::vector<ControlSegment> segs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("policy segment '" + item + "' lacks ':'");
        const std::string dur = item.substr(0, colon);
        const std::string ctl = item.substr(colon + 1);
        ControlSegment seg;
        seg.duration = dur == "inf" ? std::numeric_limits<double>::infinity() : split_numbers(dur, ',').at(0);
        if (ctl.find('=') == std::string::npos) {
            seg.controls = split_numbers(ctl, ',');
            if (seg.controls.size() != 1) throw ConfigError("policy segment '" + item + "' needs one control");
        } else {
            seg.controls.assign(s.branches.size(), std::numeric_limits<double>::quiet_NaN());
            std::stringstream cs(ctl);
            std::string pair;
            while (std::getline(cs, pair, '/')) {
                const auto eq = pair.find('=');
                if (eq == std::string::npos) throw ConfigError("policy assignment '" + pair + "' lacks '='");
                const int id = std::stoi(pair.substr(0, eq));
                seg.controls[s.index_of(id)] = split_numbers(pair.substr(eq + 1), ',').at(0);
            }
            for (double v : seg.controls)
                if (std::isnan(v)) throw ConfigError("policy segment '" + item + "' misses a branch");
        }
        segs.push_back(std::move(seg));
    }
    if (segs.empty()) throw ConfigError("empty policy");
    return ControlSchedule(std::move(segs));
}

RelayState parse_start(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("--start expects mode:x");
    RelayState st;
    try {
        st.mode = std::stoi(text.substr(0, colon));
        st.x = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("--start expects mode:x");
    }
    return st;
}

class Run {
public:
    Run(std::string command, const Common& c) : common_(c), start_(std::chrono::steady_clock::now()) {
        manifest_.command = std::move(command);
        manifest_.scenario_path = c.scenario;
        manifest_.version = JUNCTIO_VERSION;
        bytes_ = read_file(c.scenario);
        manifest_.scenario_hash = hex64(fnv1a64(bytes_));
        scenario_ = parse_scenario(bytes_);
        fs::create_directories(c.out);
    }

    const Scenario& scenario() const { return scenario_; }
    json& parameters() { return manifest_.parameters; }

    void emit(const std::string& name, const std::string& text) {
        const std::string path = (fs::path(common_.out) / name).string();
        write_file(path, text);
        manifest_.outputs.push_back(path);
    }

    void finish() {
        manifest_.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        manifest_.timestamp = buf;
        const std::string path = (fs::path(common_.out) / "manifest.json").string();
        manifest_.outputs.push_back(path);
        write_file(path, manifest_.to_json().dump(2) + "\n");
    }

private:
    Common common_;
    std::chrono::steady_clock::time_point start_;
    RunManifest manifest_;
    std::string bytes_;
    Scenario scenario_;
};

SolveOptions solve_options(double tol) {
    SolveOptions o;
    o.tol = tol;
    return o;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("scenario", c.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--tol", c.tol, "Fixed-point tolerance")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermostatic approximation of junction optimal control problems"};
    app.set_version_flag("--version", std::string(JUNCTIO_VERSION));
    app.require_subcommand(1);

    Common common;
    std::string eps_text, family = "uniform", order_text, mode_text, field_path, start_text, policy_text;
    std::string epsilons_text = "0.2,0.1,0.05,0.025";
    double horizon = 10.0, dt = 0.0, step = 0.0;
    bool limit = false;

    auto* solve = app.add_subcommand("solve", "Solve the thermostatic system (or the limit problem with --limit)");
    add_common(solve, common);
    solve->add_option("--epsilon", eps_text, "Threshold, or one threshold per branch (comma separated)");
    solve->add_option("--family", family, "Threshold family for a single --epsilon: uniform, e2ee, ee2e, eee2")
        ->capture_default_str();
    solve->add_option("--order", order_text, "Switching order, e.g. 1,3,2");
    solve->add_option("--grid-step", step, "Override the scenario grid step");
    solve->add_option("--mode", mode_text, "Junction mode for --limit: twofold, uniform, nonuniform");
    solve->add_flag("--limit", limit, "Assemble the limit value function instead");

    auto* junc = app.add_subcommand("junction", "Junction values, weights and minimisers");
    add_common(junc, common);
    junc->add_option("--mode", mode_text, "twofold, uniform or nonuniform");
    junc->add_option("--family", family, "Limit along a threshold family instead of a mode");

    auto* conv = app.add_subcommand("converge", "Convergence study along a threshold family");
    add_common(conv, common);
    conv->add_option("--family", family, "uniform, e2ee, ee2e, eee2")->capture_default_str();
    conv->add_option("--epsilons", epsilons_text, "Strictly decreasing list")->capture_default_str();
    conv->add_option("--grid-step", step, "Override the scenario grid step");

    auto* sim = app.add_subcommand("simulate", "Integrate the hybrid system under a control schedule");
    add_common(sim, common);
    sim->add_option("--epsilon", eps_text, "Threshold, or one threshold per branch")->required();
    sim->add_option("--order", order_text, "Switching order");
    sim->add_option("--start", start_text, "Initial state mode:x")->required();
    sim->add_option("--policy", policy_text, "Schedule, e.g. '0.5:-1;inf:1=-1/-1=1'")->required();
    sim->add_option("--horizon", horizon, "Final time")->capture_default_str();
    sim->add_option("--dt", dt, "Time step (default: grid step)");

    auto* ver = app.add_subcommand("verify", "Viscosity, junction and maximal-subsolution checks");
    add_common(ver, common);
    ver->add_option("--field", field_path, "Field CSV to check (default: the assembled limit)");
    ver->add_option("--mode", mode_text, "Junction mode: twofold, uniform, nonuniform");
    ver->add_option("--grid-step", step, "Override the scenario grid step");

    CLI11_PARSE(app, argc, argv);

    try {
        auto order_of = [&]() {
            std::vector<int> order;
            for (double v : split_numbers(order_text, ',')) order.push_back(static_cast<int>(v));
            return order;
        };
        auto mode_of = [&](const Scenario& s) { return mode_text.empty() ? default_mode(s) : parse_junction_mode(mode_text); };

        if (solve->parsed()) {
            Run run("solve", common);
            Scenario s = run.scenario();
            if (step > 0.0) s.grid_step = step;
            s.check();
            ValueField field;
            if (limit) {
                const JunctionReport rep = junction_report(s, mode_of(s), solve_options(common.tol));
                field = assemble_limit(s, rep, solve_options(common.tol)).field;
                run.parameters() = {{"limit", true}, {"mode", to_string(rep.mode)}, {"tol", common.tol}, {"grid_step", s.grid_step}};
            } else {
                const ThermostatConfig cfg = make_config(s, split_numbers(eps_text, ','), family, order_of());
                field = solve_thermostatic(s, cfg, solve_options(common.tol));
                run.parameters() = {{"thresholds", cfg.thresholds}, {"order", cfg.order}, {"tol", common.tol}, {"grid_step", s.grid_step}};
            }
            run.emit("field.csv", field_csv(field));
            run.emit("field.json", field_meta_json(field).dump(2) + "\n");
            run.finish();
        } else if (junc->parsed()) {
            Run run("junction", common);
            const Scenario& s = run.scenario();
            JunctionReport rep;
            if (!mode_text.empty() || family == "uniform") {
                rep = junction_report(s, mode_of(s), solve_options(common.tol));
                run.parameters() = {{"mode", to_string(rep.mode)}};
            } else {
                rep = family_limit(s, ThresholdFamily::parse(s, family), state_constraint_values(s, solve_options(common.tol)));
                run.parameters() = {{"family", family}};
            }
            const std::string text = junction_report_json(rep).dump(2) + "\n";
            run.emit("junction.json", text);
            run.finish();
            std::cout << text;
        } else if (conv->parsed()) {
            Run run("converge", common);
            Scenario s = run.scenario();
            if (step > 0.0) s.grid_step = step;
            s.check();
            const std::vector<double> eps = split_numbers(epsilons_text, ',');
            const ConvergenceStudy st = run_convergence(s, ThresholdFamily::parse(s, family), eps, solve_options(common.tol));
            run.parameters() = {{"family", family}, {"epsilons", eps}, {"tol", common.tol}, {"grid_step", s.grid_step}};
            run.emit("study.csv", study_csv(st));
            run.emit("study.json", study_json(st).dump(2) + "\n");
            run.finish();
        } else if (sim->parsed()) {
            Run run("simulate", common);
            const Scenario& s = run.scenario();
            const ThermostatConfig cfg = make_config(s, split_numbers(eps_text, ','), "uniform", order_of());
            const RelayState start = parse_start(start_text);
            if (!coherent(s, cfg, start)) throw ConfigError("start state is not coherent with the relay");
            const ControlSchedule policy = parse_policy(s, policy_text);
            const double step_dt = dt > 0.0 ? dt : s.grid_step;
            const TrajectoryRecord rec = simulate(s, cfg, start, policy, horizon, step_dt);
            run.parameters() = {{"thresholds", cfg.thresholds}, {"order", cfg.order}, {"start", start_text},
                                {"policy", policy_text}, {"horizon", horizon}, {"dt", step_dt}};
            run.emit("trajectory.csv", trajectory_csv(rec));
            run.emit("trajectory.json", trajectory_json(rec).dump(2) + "\n");
            run.finish();
        } else if (ver->parsed()) {
            Run run("verify", common);
            Scenario s = run.scenario();
            if (step > 0.0) s.grid_step = step;
            s.check();
            const SolveOptions opt = solve_options(common.tol);
            const JunctionReport rep = junction_report(s, mode_of(s), opt);
            const ValueField field =
                field_path.empty() ? assemble_limit(s, rep, opt).field : parse_field_csv(s, read_file(field_path));
            const ResidualReport res = check_viscosity(s, field);
            const auto cands = generate_candidates(s, field, rep, opt);
            const MaximalSubsolutionReport max = check_maximal_subsolution(s, field, rep, cands);
            const bool ok = res.ok() && max.all_below;
            json out;
            out["field"] = field_path.empty() ? "limit" : field_path;
            out["junction_mode"] = to_string(rep.mode);
            out["v_junction"] = num(rep.v_junction);
            out["residuals"] = residual_json(res);
            out["maximal_subsolution"] = maximal_json(max);
            out["passed"] = ok;
            run.parameters() = {{"field", out["field"]}, {"mode", to_string(rep.mode)}, {"grid_step", s.grid_step}};
            run.emit("verify.json", out.dump(2) + "\n");
            run.finish();
            if (!ok) {
                std::cerr << "verification failed: interior residual " << res.interior_max << ", junction ["
                          << res.junction_min << ", " << res.junction_max << "], tolerance " << res.tolerance
                          << (max.all_below ? "" : ", a subsolution exceeds the field") << "\n";
                return kExitVerifyFailed;
            }
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const EvalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
