// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "junctio/junctio.hpp"

using namespace junctio;

namespace {

constexpr double kAnalyticMaxSeconds = 5.0;
constexpr double kThreefoldMaxSeconds = 60.0;
constexpr double kMuSumTol = 1e-12;
constexpr double kCycleSimTol = 1e-4;
constexpr double kDerivativeLimitTol = 1e-3;
constexpr double kLimitValueTol = 1e-9;
constexpr std::size_t kMinCandidates = 20;
constexpr std::size_t kMinRecipes = 3;
constexpr std::size_t kDppStarts = 50;
constexpr double kDppGridStep = 0.01;
const std::vector<double> kEpsilons{0.2, 0.1, 0.05, 0.025};

Scenario scenario(const std::string& name) {
    return load_scenario(std::string(JUNCTIO_SCENARIO_DIR) + "/" + name + ".json");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

Outcome analytic_oracle() {
    Outcome o;
    const Scenario s = scenario("analytic");
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g = Grid::make(0.0, 5.0, s.grid_step);
    const ValueField v = solve_state_constraint(s, 1, g);
    const double secs = seconds_since(t0);
    double err = 0.0;
    const auto& sl = v.slices.front();
    for (std::size_t k = 0; k < sl.grid.size(); ++k) {
        const double x = sl.grid.node(k);
        err = std::max(err, std::fabs(sl.values[k] - (x - 1.0 + std::exp(-x))));
    }
    o.detail << "h=" << s.grid_step << " sup_error=" << err << " bound=" << 5.0 * s.grid_step << " time=" << secs
             << "s";
    o.require(s.grid_step <= 1e-3, "grid step is 1e-3");
    o.require(err <= 5.0 * s.grid_step, "sup error within 5h");
    o.require(secs < kAnalyticMaxSeconds, "runtime under 5 s");
    return o;
}

Outcome twofold_limit() {
    Outcome o;
    const Scenario s = scenario("twofold");
    const ConvergenceStudy st = run_convergence(s, ThresholdFamily::parse(s, "uniform"), kEpsilons);
    o.detail << "limit=" << st.limit_value << " C=" << st.rate_constant << " gaps=";
    for (double g : st.junction_gaps) o.detail << g << " ";
    o.detail << "errors_at_junction=";
    for (const auto& jv : st.junction_values) {
        double w = 0.0;
        for (const auto& [id, v] : jv) w = std::max(w, std::fabs(v - 1.0));
        o.detail << w << " ";
    }
    o.require(std::fabs(st.limit_value - 1.0) <= kLimitValueTol, "limit value 1");
    for (std::size_t k = 0; k < kEpsilons.size(); ++k) {
        double worst = 0.0;
        for (const auto& [id, v] : st.junction_values[k]) worst = std::max(worst, std::fabs(v - 1.0));
        o.require(worst <= st.rate_constant * kEpsilons[k] + 5.0 * s.grid_step,
                  "|V_eps(0,i) - 1| <= C eps + 5h at eps=" + std::to_string(kEpsilons[k]));
    }
    o.require(st.gaps_decreasing(), "junction gap decreasing");
    return o;
}

Outcome mu_formulas() {
    Outcome o;
    const auto a = mu_threefold(-1, -1, -1);
    const auto b = mu_threefold(-1, -2, -2);
    o.require(a == std::array<double, 3>{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, "equal speeds give thirds");
    o.require(b == std::array<double, 3>{0.5, 0.25, 0.25}, "(-1,-2,-2) gives (1/2,1/4,1/4)");
    std::mt19937_64 rng(20240517);
    std::uniform_real_distribution<double> u(-10.0, -1e-3);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto w = mu_threefold(u(rng), u(rng), u(rng));
        worst = std::max(worst, std::fabs(w[0] + w[1] + w[2] - 1.0));
    }
    o.detail << "worst_sum_error=" << worst;
    o.require(worst <= kMuSumTol, "weights sum to 1");
    return o;
}

Outcome threefold_modes() {
    Outcome o;
    const Scenario s = scenario("threefold");
    const auto t0 = std::chrono::steady_clock::now();
    const ConvergenceStudy uni = run_convergence(s, ThresholdFamily::parse(s, "uniform"), kEpsilons);
    const ConvergenceStudy non = run_convergence(s, ThresholdFamily::parse(s, "e2ee"), kEpsilons);
    const double secs = seconds_since(t0);
    const JunctionReport ru = junction_report(s, JunctionMode::threefold_uniform);
    const JunctionReport rn = junction_report(s, JunctionMode::threefold_nonuniform);
    o.detail << "h=" << s.grid_step << " uniform=" << ru.v_junction << " (" << ru.argmin
             << ") nonuniform=" << rn.v_junction << " (" << rn.argmin << ") C=" << uni.rate_constant
             << " time=" << secs << "s V_eps(0)=";
    o.require(s.grid_step <= 1e-3, "grid step is 1e-3");
    o.require(std::fabs(ru.v_junction - 34.0) <= kLimitValueTol && ru.argmin == "sigma=123", "uniform limit 34 at sigma=123");
    o.require(std::fabs(rn.v_junction - 1.0) <= kLimitValueTol && rn.argmin == "sigma=23", "non-uniform limit 1 at sigma=23");
    o.require(std::fabs(uni.limit_value - 34.0) <= kLimitValueTol, "uniform family limit 34");
    o.require(std::fabs(non.limit_value - 1.0) <= kLimitValueTol, "e2ee family limit 1");
    for (const auto* st : {&uni, &non}) {
        const double target = st == &uni ? 34.0 : 1.0;
        for (std::size_t k = 0; k < kEpsilons.size(); ++k) {
            double worst = 0.0;
            for (const auto& [id, v] : st->junction_values[k]) worst = std::max(worst, std::fabs(v - target));
            o.detail << st->family << "@" << kEpsilons[k] << ":" << st->junction_values[k].front().second << " ";
            o.require(worst <= st->rate_constant * kEpsilons[k] + 5.0 * s.grid_step,
                      st->family + " within C eps + 5h at eps=" + std::to_string(kEpsilons[k]));
        }
    }
    o.require(secs < kThreefoldMaxSeconds, "sweep under 60 s");
    return o;
}

Outcome cycle_closed_form() {
    Outcome o;
    const Scenario s = scenario("cycle");
    const JunctionReport rep = junction_report(s, JunctionMode::twofold);
    const auto combo = rep.ingredient("u0").combo;
    o.require(combo.has_value() && combo->sigma == "-1,1", "argmin is the two-branch cycle");
    if (!combo) return o;
    std::vector<double> controls(s.branches.size());
    for (std::size_t k = 0; k < combo->branches.size(); ++k)
        controls[s.index_of(combo->branches[k])] = combo->controls[k];

    const double eps = 0.1;
    const ThermostatConfig cfg = ThermostatConfig::twofold(eps);
    const CycleField c = cycle_value(s, cfg, controls);
    const double horizon = std::log(1e9) / s.lambda;
    double sim_err = 0.0;
    for (int id : s.ids())
        for (double y : {-eps, -0.5 * eps, 0.0, 0.5 * eps, eps}) {
            const RelayState start{id, s.orientation(id) * y};
            const auto rec = simulate(s, cfg, start, ControlSchedule::feedback(controls), horizon, 1e-4);
            sim_err = std::max(sim_err, std::fabs(rec.discounted_cost - c.value(id, start.x)));
        }
    o.require(sim_err <= kCycleSimTol, "simulation matches cycle_value");

    std::vector<double> gaps;
    std::vector<std::pair<double, double>> d0;  // one-sided derivatives at 0
    for (double e : {0.1, 0.05, 0.025}) {
        const CycleField ce = cycle_value(s, ThermostatConfig::twofold(e), controls);
        double gap = 0.0;
        for (int k = 0; k <= 1000; ++k) {
            const double x = -e + 2.0 * e * k / 1000.0;
            gap = std::max(gap, std::fabs(ce.derivative(1, x) - ce.derivative(-1, x)));
        }
        gaps.push_back(gap);
        d0.emplace_back(ce.derivative(1, 0.0), ce.derivative(-1, 0.0));
    }
    const double expected = 0.5;
    const double right = 2.0 * d0[2].first - d0[1].first;
    const double left = 2.0 * d0[2].second - d0[1].second;
    o.detail << "sim_error=" << sim_err << " gaps=" << gaps[0] << "," << gaps[1] << "," << gaps[2]
             << " extrapolated=" << left << "," << right << " closed_form_limit=" << c.derivative_limit(1);
    o.require(gaps[1] < gaps[0] && gaps[2] < gaps[1], "derivative gap decreasing");
    o.require(std::fabs(right - expected) <= kDerivativeLimitTol, "branch 1 derivative limit 0.5");
    o.require(std::fabs(left - expected) <= kDerivativeLimitTol, "branch -1 derivative limit 0.5");
    return o;
}

struct Case {
    std::string name;
    Scenario s;
    JunctionReport rep;
    ValueField v;
};

std::vector<Case> limit_cases() {
    std::vector<Case> out;
    for (const std::string name : {"analytic", "twofold", "cycle", "symmetric"}) {
        Scenario s = scenario(name);
        JunctionReport rep = junction_report(s, default_mode(s));
        ValueField v = assemble_limit(s, rep).field;
        out.push_back({name, std::move(s), std::move(rep), std::move(v)});
    }
    const Scenario t = scenario("threefold");
    const std::vector<double> vsc = state_constraint_values(t);
    for (const std::string fam : {"uniform", "e2ee", "ee2e", "eee2"}) {
        JunctionReport rep = family_limit(t, ThresholdFamily::parse(t, fam), vsc);
        ValueField v = assemble_limit(t, rep).field;
        out.push_back({"threefold/" + fam, t, std::move(rep), std::move(v)});
    }
    {
        JunctionReport rep = junction_value(t, JunctionMode::threefold_nonuniform, vsc);
        ValueField v = assemble_limit(t, rep).field;
        out.push_back({"threefold/nonuniform", t, std::move(rep), std::move(v)});
    }
    return out;
}

Outcome ishii(const std::vector<Case>& cases) {
    Outcome o;
    // Calibration: the analytic field fixes the scale of the residual bound.
    const ResidualReport cal = check_viscosity(cases.front().s, cases.front().v);
    o.detail << "analytic residual/tol=" << cal.interior_max / cal.tolerance << " |";
    for (const auto& c : cases) {
        const ResidualReport r = check_viscosity(c.s, c.v);
        o.detail << " " << c.name << ":" << r.interior_max << "/" << r.tolerance;
        o.require(r.interior_ok(), c.name + " interior residual");
        o.require(r.junction_min <= r.tolerance, c.name + " junction_min");
        o.require(r.junction_max >= -r.tolerance, c.name + " junction_max");
    }
    // Negative control: a localised bump on the twofold limit.
    const Case& tw = cases[1];
    ValueField bumped = tw.v;
    for (auto& sl : bumped.slices)
        for (std::size_t k = 0; k < sl.values.size(); ++k)
            sl.values[k] += 0.05 * std::exp(-std::pow((sl.grid.node(k) - 1.0) / 0.1, 2));
    const ResidualReport neg = check_viscosity(tw.s, bumped);
    o.detail << " | corrupted:" << neg.interior_max << "/" << neg.tolerance;
    o.require(!neg.ok(), "corrupted field is rejected");
    return o;
}

Outcome maximal(const std::vector<Case>& cases) {
    Outcome o;
    for (const auto& c : cases) {
        const auto cands = generate_candidates(c.s, c.v, c.rep);
        const auto m = check_maximal_subsolution(c.s, c.v, c.rep, cands);
        o.detail << " " << c.name << ":" << m.subsolutions << "/" << cands.size() << "," << m.recipes_represented;
        o.require(m.subsolutions >= kMinCandidates, c.name + " at least 20 subsolutions");
        o.require(m.recipes_represented >= kMinRecipes, c.name + " three recipes");
        o.require(m.all_below, c.name + " every subsolution below V");
        o.require(m.reference_attained, c.name + " V attained at the junction");
    }
    return o;
}

Outcome order_independent() {
    Outcome o;
    const Scenario s = scenario("threefold");
    const double bound_c = junction_rate_constant(s);
    for (double eps : {0.1, 0.05}) {
        const OrderStudy st = order_independence(s, eps, {{1, 2, 3}, {1, 3, 2}, {2, 3, 1}});
        const double bound = bound_c * eps + 5.0 * s.grid_step;
        o.detail << " eps=" << eps << " spread=" << st.max_spread << " bound=" << bound;
        o.require(st.max_spread <= bound, "orders agree at eps=" + std::to_string(eps));
    }
    return o;
}

Outcome dpp() {
    Outcome o;
    for (const std::string name : {"analytic", "twofold", "cycle", "symmetric", "threefold"}) {
        Scenario s = scenario(name);
        s.grid_step = kDppGridStep;
        const ThermostatConfig cfg =
            s.topology() == Topology::twofold ? ThermostatConfig::twofold(0.1) : ThermostatConfig::uniform(s, 0.1);
        const DppCheck d = cross_check_dpp(s, cfg, kDppStarts);
        o.detail << " " << name << ":" << d.worst_gap << " (raw " << d.worst_raw_gap << ")";
        o.require(d.samples.size() == kDppStarts, name + " 50 starts");
        o.require(d.ok(), name + " worst gap within allowance");
    }
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const std::string& name, const std::function<Outcome()>& run) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
        std::fflush(stdout);
    };

    report("analytic oracle", analytic_oracle);
    report("twofold limit", twofold_limit);
    report("mu formulas", mu_formulas);
    report("threefold uniform vs non-uniform", threefold_modes);
    report("cycle closed form", cycle_closed_form);
    std::vector<Case> cases;
    try {
        cases = limit_cases();
    } catch (const std::exception& e) {
        std::printf("limit assembly failed: %s\n", e.what());
    }
    report("Ishii conditions", [&] {
        if (cases.size() < 2) throw std::runtime_error("no limit fields");
        return ishii(cases);
    });
    report("maximal subsolution", [&] {
        if (cases.empty()) throw std::runtime_error("no limit fields");
        return maximal(cases);
    });
    report("order independence", order_independent);
    report("solver-simulation consistency", dpp);
    return failures == 0 ? 0 : 1;
}
