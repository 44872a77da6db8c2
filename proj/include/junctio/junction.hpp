#pragma once

// Closed-form junction analysis.
//
// All formulas are evaluated in local coordinates, where a control points
// into the junction when its local dynamics at 0 are <= 0. For the twofold
// branch -1 this is the native condition f(0, a) >= 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "junctio/grid.hpp"
#include "junctio/hjb.hpp"
#include "junctio/model.hpp"

namespace junctio {

inline constexpr double kTieTolerance = 1e-10;

inline bool ties_with(double v, double best) {
    if (std::isinf(v) || std::isinf(best)) return v == best;
    return std::fabs(v - best) <= kTieTolerance * std::max(1.0, std::fabs(best));
}

/// Weight of branch -1 in a twofold cycle: mu f_minus + (1 - mu) f_plus = 0
/// with f_minus = f_{-1}(0, a_{-1}) >= 0 and f_plus = f_1(0, a_1) <= 0.
inline double mu_twofold(double f_minus, double f_plus) {
    if (!(f_minus >= 0.0) || !(f_plus <= 0.0))
        throw std::invalid_argument("mu_twofold needs f_minus >= 0 and f_plus <= 0");
    if (f_minus == 0.0 && f_plus == 0.0) throw std::invalid_argument("mu_twofold: both dynamics vanish");
    return f_plus / (f_plus - f_minus);
}

/// Time fractions of a three-branch cycle with inward dynamics f_i <= 0.
inline std::array<double, 3> mu_threefold(double f1, double f2, double f3) {
    if (!(f1 <= 0.0) || !(f2 <= 0.0) || !(f3 <= 0.0))
        throw std::invalid_argument("mu_threefold needs nonpositive dynamics");
    const int zeros = (f1 == 0.0) + (f2 == 0.0) + (f3 == 0.0);
    if (zeros > 1) throw std::invalid_argument("mu_threefold: at most one dynamics value may vanish");
    const double d = f2 * f3 + f1 * f3 + f1 * f2;
    return {f2 * f3 / d, f1 * f3 / d, f1 * f2 / d};
}

struct FeasibleCombo {
    std::vector<int> branches;
    std::vector<double> controls;  // aligned with branches
    std::vector<double> weights;   // aligned with branches
    std::string sigma;             // "123", "12", "13", "23", "-1,1", or "rest"
    double cycle_cost = 0.0;       // convexified running cost; the value is cycle_cost / lambda
};

/// Minimum over an enumerated family; +inf with no combo when infeasible.
struct JunctionValue {
    double value = std::numeric_limits<double>::infinity();
    std::optional<FeasibleCombo> argmin;
    std::vector<FeasibleCombo> ties;

    bool feasible() const { return std::isfinite(value); }

    void offer(const FeasibleCombo& c, double lambda) {
        const double v = c.cycle_cost / lambda;
        if (!argmin || (v < value && !ties_with(v, value))) {
            value = v;
            argmin = c;
            ties.assign(1, c);
        } else if (ties_with(v, value)) {
            ties.push_back(c);
            if (v < value) value = v;
        }
    }
};

namespace detail {

inline void offer_rest(const Scenario& s, const std::vector<int>& ids, JunctionValue& out) {
    for (int id : ids)
        for (double a : s.controls)
            if (s.local_dynamics(id, 0.0, a) == 0.0)
                out.offer({{id}, {a}, {1.0}, "rest", s.local_cost(id, 0.0, a)}, s.lambda);
}

inline void offer_pair(const Scenario& s, int i, int j, const std::string& sigma, JunctionValue& out) {
    for (double ai : s.controls) {
        const double fi = s.local_dynamics(i, 0.0, ai);
        if (fi > 0.0) continue;
        for (double aj : s.controls) {
            const double fj = s.local_dynamics(j, 0.0, aj);
            if (fj > 0.0 || (fi == 0.0 && fj == 0.0)) continue;
            const double mi = mu_twofold(-fi, fj);
            const double cost = mi * s.local_cost(i, 0.0, ai) + (1.0 - mi) * s.local_cost(j, 0.0, aj);
            out.offer({{i, j}, {ai, aj}, {mi, 1.0 - mi}, sigma, cost}, s.lambda);
        }
    }
}

}  // namespace detail

/// u0(0) of the twofold junction.
inline JunctionValue u0_twofold(const Scenario& s) {
    if (s.topology() != Topology::twofold) throw std::invalid_argument("u0_twofold needs a twofold scenario");
    JunctionValue out;
    detail::offer_pair(s, -1, 1, "-1,1", out);
    detail::offer_rest(s, {-1, 1}, out);
    return out;
}

/// u_{1,2,3}(0): full three-branch cycles.
inline JunctionValue u123(const Scenario& s) {
    if (s.topology() != Topology::threefold) throw std::invalid_argument("u123 needs a threefold scenario");
    JunctionValue out;
    for (double a1 : s.controls) {
        const double f1 = s.local_dynamics(1, 0.0, a1);
        if (f1 > 0.0) continue;
        for (double a2 : s.controls) {
            const double f2 = s.local_dynamics(2, 0.0, a2);
            if (f2 > 0.0) continue;
            for (double a3 : s.controls) {
                const double f3 = s.local_dynamics(3, 0.0, a3);
                if (f3 > 0.0 || (f1 == 0.0) + (f2 == 0.0) + (f3 == 0.0) > 1) continue;
                const auto mu = mu_threefold(f1, f2, f3);
                const double cost = mu[0] * s.local_cost(1, 0.0, a1) + mu[1] * s.local_cost(2, 0.0, a2) +
                                    mu[2] * s.local_cost(3, 0.0, a3);
                out.offer({{1, 2, 3}, {a1, a2, a3}, {mu[0], mu[1], mu[2]}, "123", cost}, s.lambda);
            }
        }
    }
    detail::offer_rest(s, {1, 2, 3}, out);
    return out;
}

/// u_{i,j}(0): cycles between two branches of the threefold junction.
inline JunctionValue u_pair(const Scenario& s, int i, int j) {
    if (s.topology() != Topology::threefold) throw std::invalid_argument("u_pair needs a threefold scenario");
    if (i == j) throw std::invalid_argument("u_pair needs two distinct branches");
    if (i > j) std::swap(i, j);
    JunctionValue out;
    detail::offer_pair(s, i, j, std::to_string(i) + std::to_string(j), out);
    detail::offer_rest(s, {i, j}, out);
    return out;
}

enum class JunctionMode { twofold, threefold_uniform, threefold_nonuniform };

inline std::string to_string(JunctionMode m) {
    switch (m) {
    case JunctionMode::twofold: return "twofold";
    case JunctionMode::threefold_uniform: return "uniform";
    case JunctionMode::threefold_nonuniform: return "nonuniform";
    }
    return {};
}

inline JunctionMode parse_junction_mode(const std::string& name) {
    if (name == "twofold") return JunctionMode::twofold;
    if (name == "uniform" || name == "threefold_uniform") return JunctionMode::threefold_uniform;
    if (name == "nonuniform" || name == "threefold_nonuniform") return JunctionMode::threefold_nonuniform;
    throw ConfigError("unknown junction mode '" + name + "'");
}

inline JunctionMode default_mode(const Scenario& s) {
    return s.topology() == Topology::twofold ? JunctionMode::twofold : JunctionMode::threefold_uniform;
}

struct JunctionIngredient {
    std::string tag;  // "u0", "sigma=123", "sigma=23", "sc(2)", ...
    double value = std::numeric_limits<double>::infinity();
    std::optional<FeasibleCombo> combo;
};

struct JunctionReport {
    JunctionMode mode = JunctionMode::twofold;
    std::optional<JunctionValue> u0;      // twofold u0(0), or the threefold non-uniform minimum
    std::optional<JunctionValue> u123;
    std::vector<std::pair<std::string, JunctionValue>> u_pair;  // "12", "13", "23"
    std::vector<std::pair<int, double>> v_sc;                   // V_sc(i)(0)
    std::vector<JunctionIngredient> ingredients;                // everything the minimum ranges over
    double v_junction = std::numeric_limits<double>::infinity();
    std::string argmin;
    std::vector<std::string> ties;

    const JunctionIngredient& ingredient(const std::string& tag) const {
        for (const auto& g : ingredients)
            if (g.tag == tag) return g;
        throw std::out_of_range("no junction ingredient '" + tag + "'");
    }

    /// The combo realising the minimum, if the minimum is a cycle value.
    std::optional<FeasibleCombo> argmin_combo() const { return ingredient(argmin).combo; }
};

/// V(0) as the minimum of the cycle values and the state-constraint values.
/// v_sc is aligned with scenario.branches.
inline JunctionReport junction_value(const Scenario& s, JunctionMode mode, const std::vector<double>& v_sc) {
    if (v_sc.size() != s.branches.size()) throw std::invalid_argument("one state-constraint value per branch");
    if ((mode == JunctionMode::twofold) != (s.topology() == Topology::twofold))
        throw std::invalid_argument("junction mode does not match the scenario topology");
    JunctionReport r;
    r.mode = mode;
    for (std::size_t k = 0; k < s.branches.size(); ++k) r.v_sc.emplace_back(s.branches[k].id, v_sc[k]);

    auto add = [&](const std::string& tag, const JunctionValue& jv) {
        r.ingredients.push_back({tag, jv.value, jv.argmin});
    };
    if (mode == JunctionMode::twofold) {
        r.u0 = u0_twofold(s);
        add("u0", *r.u0);
    } else {
        r.u123 = u123(s);
        for (auto [i, j] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}})
            r.u_pair.emplace_back(std::to_string(i) + std::to_string(j), u_pair(s, i, j));
        if (mode == JunctionMode::threefold_uniform) {
            add("sigma=123", *r.u123);
        } else {
            JunctionValue u0;
            for (const auto& [tag, jv] : r.u_pair) {
                add("sigma=" + tag, jv);
                for (const auto& c : jv.ties) u0.offer(c, s.lambda);
            }
            add("sigma=123", *r.u123);
            for (const auto& c : r.u123->ties) u0.offer(c, s.lambda);
            r.u0 = u0;
        }
    }
    for (const auto& [id, v] : r.v_sc) r.ingredients.push_back({"sc(" + std::to_string(id) + ")", v, std::nullopt});

    for (const auto& g : r.ingredients)
        if (r.argmin.empty() || (g.value < r.v_junction && !ties_with(g.value, r.v_junction))) {
            r.v_junction = g.value;
            r.argmin = g.tag;
        }
    for (const auto& g : r.ingredients)
        if (ties_with(g.value, r.v_junction)) r.ties.push_back(g.tag);
    return r;
}

/// junction_value with the state-constraint values computed on [0, X].
inline JunctionReport junction_report(const Scenario& s, JunctionMode mode, const SolveOptions& opt = {}) {
    return junction_value(s, mode, state_constraint_values(s, opt));
}

/// Threshold families eps -> (eps_1, eps_2, eps_3) with each entry eps or eps^2.
struct ThresholdFamily {
    std::string name = "uniform";
    std::vector<int> powers;  // aligned with scenario.branches

    static ThresholdFamily parse(const Scenario& s, const std::string& name) {
        ThresholdFamily f;
        f.name = name;
        f.powers.assign(s.branches.size(), 1);
        if (name == "uniform") return f;
        if (s.topology() == Topology::threefold) {
            const std::vector<std::string> names{"e2ee", "ee2e", "eee2"};
            for (std::size_t k = 0; k < names.size(); ++k)
                if (name == names[k]) {
                    f.powers[s.index_of(static_cast<int>(k) + 1)] = 2;
                    return f;
                }
        }
        throw ConfigError("unknown threshold family '" + name + "'");
    }

    static std::vector<ThresholdFamily> canonical(const Scenario& s) {
        if (s.topology() == Topology::twofold) return {parse(s, "uniform")};
        return {parse(s, "uniform"), parse(s, "e2ee"), parse(s, "ee2e"), parse(s, "eee2")};
    }

    ThermostatConfig at(const Scenario& s, double eps, std::vector<int> order = {}) const {
        ThermostatConfig c = ThermostatConfig::uniform(s, eps);
        for (std::size_t k = 0; k < powers.size(); ++k) c.thresholds[k] = std::pow(eps, powers[k]);
        if (!order.empty()) c.order = std::move(order);
        return c;
    }

    /// Branches whose thresholds stay of order eps.
    std::string sigma() const {
        std::string out;
        for (std::size_t k = 0; k < powers.size(); ++k)
            if (powers[k] == 1) out += std::to_string(k + 1);
        return out;
    }
};

/// Limit of V_eps(0) along a threshold family: the cycle value over the
/// branches that keep thresholds of order eps, or a state-constraint value.
inline JunctionReport family_limit(const Scenario& s, const ThresholdFamily& fam, const std::vector<double>& v_sc) {
    if (s.topology() == Topology::twofold || fam.name == "uniform")
        return junction_value(s, default_mode(s), v_sc);
    JunctionReport r = junction_value(s, JunctionMode::threefold_nonuniform, v_sc);
    const std::string keep = "sigma=" + fam.sigma();
    std::vector<JunctionIngredient> kept;
    for (const auto& g : r.ingredients)
        if (g.tag == keep || g.tag.rfind("sc(", 0) == 0) kept.push_back(g);
    r.ingredients = kept;
    r.argmin.clear();
    r.ties.clear();
    r.v_junction = std::numeric_limits<double>::infinity();
    for (const auto& g : r.ingredients)
        if (r.argmin.empty() || (g.value < r.v_junction && !ties_with(g.value, r.v_junction))) {
            r.v_junction = g.value;
            r.argmin = g.tag;
        }
    for (const auto& g : r.ingredients)
        if (ties_with(g.value, r.v_junction)) r.ties.push_back(g.tag);
    return r;
}

struct LimitAssembly {
    ValueField field;
    std::vector<std::pair<int, double>> sc_deviation;  // sup |V - V_sc(i)| on branches tagged as argmin
};

/// Limit value function: on every branch the Dirichlet problem on [0, X]
/// with boundary datum V(0). On branches whose state-constraint value is the
/// minimiser the result is compared with the state-constraint solution.
inline LimitAssembly assemble_limit(const Scenario& s, const JunctionReport& rep, const SolveOptions& opt = {}) {
    if (!std::isfinite(rep.v_junction)) throw std::invalid_argument("junction value is not finite");
    const Grid g = Grid::make(0.0, s.domain_radius, s.grid_step);
    LimitAssembly out;
    out.field.slices.resize(s.branches.size());
    parallel_for(s.branches.size(), [&](std::size_t k) {
        out.field.slices[k] = solve_branch_dirichlet(s, s.branches[k].id, g, rep.v_junction, opt).slices.front();
    });
    for (const auto& tag : rep.ties) {
        if (tag.rfind("sc(", 0) != 0) continue;
        const int id = std::stoi(tag.substr(3));
        const ValueField sc = solve_state_constraint(s, id, g, opt);
        const auto& a = out.field.slice(id).values;
        const auto& b = sc.slices.front().values;
        double dev = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::fabs(a[i] - b[i]));
        out.sc_deviation.emplace_back(id, dev);
    }
    out.field.meta.kind = "limit";
    out.field.meta.scenario_hash = scenario_hash(s);
    out.field.meta.tol = opt.tol;
    out.field.meta.tail_bound = detail::tail_bound(s, value_cap(s));
    return out;
}

/// Closed-form value of the switching cycle that runs every branch with a
/// fixed inward control, frozen at the junction: branch i is crossed from
/// +eps_i to -eps_i at speed s_i = -f_i(0, a_i) (local coordinates).
struct CycleField {
    std::vector<int> ids;
    std::vector<double> eps, speed, cost, entry;  // entry: value at local +eps_i
    std::vector<int> next;                        // index of the next branch
    std::vector<double> orientation;
    double lambda = 1.0;

    std::size_t index(int id) const {
        for (std::size_t k = 0; k < ids.size(); ++k)
            if (ids[k] == id) return k;
        throw std::out_of_range("unknown branch " + std::to_string(id));
    }

    /// Value in local coordinates, y in [-eps_i, eps_i].
    double local_value(int id, double y) const {
        const std::size_t k = index(id);
        const double decay = std::exp(-lambda * (y + eps[k]) / speed[k]);
        return cost[k] * (1.0 - decay) / lambda + decay * entry[static_cast<std::size_t>(next[k])];
    }
    double local_derivative(int id, double y) const {
        const std::size_t k = index(id);
        const double decay = std::exp(-lambda * (y + eps[k]) / speed[k]);
        return decay * (cost[k] - lambda * entry[static_cast<std::size_t>(next[k])]) / speed[k];
    }

    /// Value and derivative in native coordinates.
    double value(int id, double x) const { return local_value(id, orientation[index(id)] * x); }
    double derivative(int id, double x) const {
        const double o = orientation[index(id)];
        return o * local_derivative(id, o * x);
    }

    /// Time-fraction weights of the cycle; they do not depend on the scale of
    /// the thresholds.
    std::vector<double> weights() const {
        std::vector<double> w(ids.size());
        double total = 0.0;
        for (std::size_t k = 0; k < ids.size(); ++k) total += w[k] = eps[k] / speed[k];
        for (auto& v : w) v /= total;
        return w;
    }

    /// Limit of the cycle value as the thresholds shrink proportionally.
    double limit_value() const {
        const auto w = weights();
        double u = 0.0;
        for (std::size_t k = 0; k < ids.size(); ++k) u += w[k] * cost[k];
        return u / lambda;
    }

    /// Limit of the native derivative on branch id as the thresholds shrink.
    /// For the twofold cycle both branches give (l_1 - l_{-1}) / (f_{-1} - f_1).
    double derivative_limit(int id) const {
        const std::size_t k = index(id);
        return orientation[k] * (cost[k] - lambda * limit_value()) / speed[k];
    }

    /// Value on [0, eps_i] of the path that rides to the junction and then
    /// follows the cycle at its limit value.
    double approach_value(int id, double y) const {
        const std::size_t k = index(id);
        const double decay = std::exp(-lambda * y / speed[k]);
        return cost[k] * (1.0 - decay) / lambda + decay * limit_value();
    }
};

/// controls[k] is the constant control used in branch scenario.branches[k].
inline CycleField cycle_value(const Scenario& s, const ThermostatConfig& cfg, const std::vector<double>& controls) {
    cfg.check(s);
    const std::size_t n = s.branches.size();
    if (controls.size() != n) throw std::invalid_argument("one cycle control per branch is required");
    CycleField c;
    c.lambda = s.lambda;
    for (std::size_t k = 0; k < n; ++k) {
        const int id = s.branches[k].id;
        const double f = s.local_dynamics(id, 0.0, controls[k]);
        if (!(f < 0.0))
            throw std::invalid_argument("cycle control on branch " + std::to_string(id) +
                                        " does not move toward the junction");
        c.ids.push_back(id);
        c.eps.push_back(cfg.thresholds[k]);
        c.speed.push_back(-f);
        c.cost.push_back(s.local_cost(id, 0.0, controls[k]));
        c.next.push_back(static_cast<int>(s.index_of(cfg.next(id))));
        c.orientation.push_back(s.orientation(id));
    }
    // entry_k = A_k + B_k * entry_next(k); compose once around the cycle.
    std::vector<double> A(n), B(n);
    for (std::size_t k = 0; k < n; ++k) {
        B[k] = std::exp(-s.lambda * 2.0 * c.eps[k] / c.speed[k]);
        A[k] = c.cost[k] * (1.0 - B[k]) / s.lambda;
    }
    double a = 0.0, b = 1.0;
    std::size_t k = 0;
    for (std::size_t step = 0; step < n; ++step) {
        a += b * A[k];
        b *= B[k];
        k = static_cast<std::size_t>(c.next[k]);
    }
    c.entry.assign(n, 0.0);
    c.entry[0] = a / (1.0 - b);
    // Walk the cycle backwards: entry_prev = A_prev + B_prev * entry_k.
    std::vector<std::size_t> prev(n);
    for (std::size_t i = 0; i < n; ++i) prev[static_cast<std::size_t>(c.next[i])] = i;
    k = 0;
    for (std::size_t step = 1; step < n; ++step) {
        const std::size_t p = prev[k];
        c.entry[p] = A[p] + B[p] * c.entry[k];
        k = p;
    }
    return c;
}

}  // namespace junctio
