#pragma once

// Semi-Lagrangian value iteration on one branch, and the coupled fixed point
// of the thermostatic system.
//
// On a branch discretised with step h the foot of every characteristic is a
// neighbouring node: the local time step is Delta = h / |f|. A control with
// |f| below f_floor is treated as stationary and contributes l / lambda.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "junctio/grid.hpp"
#include "junctio/model.hpp"
#include "junctio/parallel.hpp"

namespace junctio {

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

/// H_i(x, p) = max_a { -f_i(x,a) p - l_i(x,a) } in native coordinates.
inline double hamiltonian(const Scenario& s, int id, double x, double p) {
    const BranchSpec& b = s.branch(id);
    double best = -std::numeric_limits<double>::infinity();
    for (double a : s.controls) best = std::max(best, -b.dynamics(x, a) * p - b.cost(x, a));
    return best;
}

/// Hamiltonian in local (junction-outward) coordinates.
inline double local_hamiltonian(const Scenario& s, int id, double y, double p) {
    double best = -std::numeric_limits<double>::infinity();
    for (double a : s.controls) best = std::max(best, -s.local_dynamics(id, y, a) * p - s.local_cost(id, y, a));
    return best;
}

enum class LeftBoundary { exit_cost, state_constraint };

struct SolveOptions {
    double tol = 1e-9;              // sup-norm stopping tolerance
    std::size_t max_sweeps = 0;     // 0: derived from the grid and the discount
    std::size_t max_outer = 0;      // 0: derived from the thresholds
    double f_floor = 1e-6;
};

/// Precomputed semi-Lagrangian operator of one branch.
class BranchOperator {
public:
    static constexpr int kNone = -1;

    struct Candidate {
        int target;     // neighbour node, or kNone for a stationary control
        int control;
        double cost;    // running cost over the step (or l / lambda when stationary)
        double discount;
    };

    BranchOperator(const Scenario& s, int id, const Grid& grid, LeftBoundary left, double cap,
                   double f_floor = 1e-6)
        : grid_(grid), left_(left), cap_(cap) {
        const std::size_t n = grid.size();
        const double h = grid.step();
        const double lambda = s.lambda;
        offsets_.reserve(n + 1);
        offsets_.push_back(0);
        exit_control_.assign(n, kNone);
        for (std::size_t k = 0; k < n; ++k) {
            const double y = grid.node(k);
            for (std::size_t c = 0; c < s.controls.size(); ++c) {
                const double a = s.controls[c];
                const double f = s.local_dynamics(id, y, a);
                const double l = s.local_cost(id, y, a);
                if (!std::isfinite(f) || !std::isfinite(l))
                    throw EvalError("non-finite dynamics or cost on branch " + std::to_string(id));
                const int ci = static_cast<int>(c);
                if (std::fabs(f) < f_floor) {
                    cands_.push_back({kNone, ci, l / lambda, 0.0});
                    continue;
                }
                if (f < 0.0 && k == 0) {
                    if (exit_control_[0] == kNone) exit_control_[0] = ci;
                    continue;
                }
                if (f > 0.0 && k + 1 == n) continue;
                const double dt = h / std::fabs(f);
                const double disc = std::exp(-lambda * dt);
                const int target = static_cast<int>(f < 0.0 ? k - 1 : k + 1);
                cands_.push_back({target, ci, l * (1.0 - disc) / lambda, disc});
            }
            offsets_.push_back(cands_.size());
        }
        add_two_cycles();
    }

    const Grid& grid() const noexcept { return grid_; }
    double cap() const noexcept { return cap_; }
    LeftBoundary left_boundary() const noexcept { return left_; }

    /// Updated value of node k given the current field; also reports the
    /// minimising control (lowest index on ties, kNone for the exit).
    double node_update(const std::vector<double>& v, std::size_t k, double exit_cost, int& arg) const {
        double best = std::numeric_limits<double>::infinity();
        arg = kNone;
        for (std::size_t j = offsets_[k]; j < offsets_[k + 1]; ++j) {
            const Candidate& c = cands_[j];
            const double val = c.target == kNone ? c.cost : c.cost + c.discount * v[static_cast<std::size_t>(c.target)];
            if (val < best) {
                best = val;
                arg = c.control;
            }
        }
        if (k == 0 && left_ == LeftBoundary::exit_cost && exit_cost < best) {
            best = exit_cost;
            arg = exit_control_[0];
        }
        if (!std::isfinite(best)) best = cap_;
        return best;
    }

    /// Jacobi application: out = T(in).
    void apply(const std::vector<double>& in, std::vector<double>& out, double exit_cost) const {
        out.resize(in.size());
        int arg;
        for (std::size_t k = 0; k < in.size(); ++k) out[k] = node_update(in, k, exit_cost, arg);
    }

    /// One Gauss-Seidel sweep in the given direction; returns the sup change.
    double sweep(std::vector<double>& v, double exit_cost, bool forward) const {
        const std::size_t n = v.size();
        double change = 0.0;
        int arg;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = forward ? i : n - 1 - i;
            const double nv = node_update(v, k, exit_cost, arg);
            change = std::max(change, std::fabs(nv - v[k]));
            v[k] = nv;
        }
        return change;
    }

    std::vector<int> policy(const std::vector<double>& v, double exit_cost) const {
        std::vector<int> out(v.size());
        for (std::size_t k = 0; k < v.size(); ++k) node_update(v, k, exit_cost, out[k]);
        return out;
    }

private:
    // Shuttling forever between node k and a neighbour j is an admissible
    // policy with closed-form value. Adding it as a constant candidate leaves
    // the fixed point unchanged (the fixed point is below every policy value)
    // but removes the slow geometric convergence of Gauss-Seidel on such pairs.
    void add_two_cycles() {
        const std::size_t n = offsets_.size() - 1;
        std::vector<Candidate> merged;
        std::vector<std::size_t> offsets{0};
        for (std::size_t k = 0; k < n; ++k) {
            double best = std::numeric_limits<double>::infinity();
            int arg = kNone;
            for (std::size_t j = offsets_[k]; j < offsets_[k + 1]; ++j) {
                const Candidate& go = cands_[j];
                merged.push_back(go);
                if (go.target == kNone) continue;
                const auto t = static_cast<std::size_t>(go.target);
                for (std::size_t i = offsets_[t]; i < offsets_[t + 1]; ++i) {
                    const Candidate& back = cands_[i];
                    if (back.target != static_cast<int>(k)) continue;
                    const double v = (go.cost + go.discount * back.cost) / (1.0 - go.discount * back.discount);
                    if (v < best) {
                        best = v;
                        arg = go.control;
                    }
                }
            }
            if (arg != kNone) merged.push_back({kNone, arg, best, 0.0});
            offsets.push_back(merged.size());
        }
        cands_ = std::move(merged);
        offsets_ = std::move(offsets);
    }

    Grid grid_;
    LeftBoundary left_;
    double cap_;
    std::vector<std::size_t> offsets_;
    std::vector<Candidate> cands_;
    std::vector<int> exit_control_;
};

struct FieldSlice {
    int branch = 0;
    int mode = 0;
    double orientation = 1.0;  // native x = orientation * local y
    Grid grid;
    std::vector<double> values;
    std::vector<int> policy;

    double at(double y) const { return grid.interpolate(values, y); }
};

struct FieldMeta {
    std::string kind;
    std::uint64_t scenario_hash = 0;
    std::vector<double> thresholds;
    std::vector<int> order;
    double tol = 0.0;
    std::size_t iterations = 0;
    std::size_t inner_sweeps = 0;
    double residual = 0.0;
    double tail_bound = 0.0;
    bool converged = true;
    std::vector<double> residual_history;
};

struct ValueField {
    std::vector<FieldSlice> slices;
    FieldMeta meta;

    const FieldSlice& slice(int branch) const {
        for (const auto& s : slices)
            if (s.branch == branch) return s;
        throw std::out_of_range("no slice for branch " + std::to_string(branch));
    }
    FieldSlice& slice(int branch) {
        for (auto& s : slices)
            if (s.branch == branch) return s;
        throw std::out_of_range("no slice for branch " + std::to_string(branch));
    }

    /// Value of branch `branch` at local coordinate y.
    double at(int branch, double y) const { return slice(branch).at(y); }
};

struct SweepResult {
    std::size_t sweeps = 0;
    double residual = 0.0;
    bool converged = false;
};

inline std::size_t default_max_sweeps(const Scenario& s, const Grid& g, double cap, double tol) {
    const double m = std::max(1e-6, validate_scenario(s).sup_dynamics);
    const double per_sweep = s.lambda * g.step() / m;
    const double need = std::log(std::max(cap, 1.0) / tol + 10.0) / per_sweep;
    return static_cast<std::size_t>(std::min(4.0 * need + 200.0, 5e7));
}

/// Alternating Gauss-Seidel sweeps until the sup change drops below tol.
inline SweepResult iterate_to_fixed_point(const BranchOperator& op, std::vector<double>& v, double exit_cost,
                                          double tol, std::size_t max_sweeps) {
    SweepResult r;
    bool forward = true;
    while (r.sweeps < max_sweeps) {
        r.residual = op.sweep(v, exit_cost, forward);
        ++r.sweeps;
        forward = !forward;
        if (r.residual < tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

namespace detail {

inline double tail_bound(const Scenario& s, double cap) {
    const double m = validate_scenario(s).sup_dynamics;
    if (m <= 0.0) return 0.0;
    return cap * std::exp(-s.lambda * s.domain_radius / m);
}

inline FieldSlice single_branch_solve(const Scenario& s, int id, const Grid& grid, LeftBoundary left,
                                      double exit_cost, const SolveOptions& opt, SweepResult& res) {
    const double cap = value_cap(s, std::max(0.0, -grid.left));
    BranchOperator op(s, id, grid, left, cap, opt.f_floor);
    FieldSlice out;
    out.branch = id;
    out.mode = id;
    out.orientation = s.orientation(id);
    out.grid = grid;
    out.values.assign(grid.size(), cap);
    const std::size_t max_sweeps = opt.max_sweeps ? opt.max_sweeps : default_max_sweeps(s, grid, cap, opt.tol);
    res = iterate_to_fixed_point(op, out.values, exit_cost, opt.tol, max_sweeps);
    if (!res.converged)
        throw ConvergenceError("branch " + std::to_string(id) + " did not converge: residual " +
                                   std::to_string(res.residual) + " after " + std::to_string(res.sweeps) +
                                   " sweeps",
                               {res.residual});
    out.policy = op.policy(out.values, exit_cost);
    return out;
}

}  // namespace detail

/// Dirichlet exit-cost problem on one branch: the left node takes
/// min(exit_cost, continuation), the right end is state-constrained.
inline ValueField solve_branch_dirichlet(const Scenario& s, int id, const Grid& grid, double exit_cost,
                                         const SolveOptions& opt = {}) {
    SweepResult r;
    ValueField f;
    f.slices.push_back(detail::single_branch_solve(s, id, grid, LeftBoundary::exit_cost, exit_cost, opt, r));
    f.meta.kind = "dirichlet";
    f.meta.scenario_hash = scenario_hash(s);
    f.meta.tol = opt.tol;
    f.meta.iterations = r.sweeps;
    f.meta.residual = r.residual;
    f.meta.tail_bound = detail::tail_bound(s, value_cap(s));
    return f;
}

/// Problem confined to one branch: exiting controls are inadmissible at the
/// left node as well.
inline ValueField solve_state_constraint(const Scenario& s, int id, const Grid& grid, const SolveOptions& opt = {}) {
    SweepResult r;
    ValueField f;
    f.slices.push_back(detail::single_branch_solve(s, id, grid, LeftBoundary::state_constraint, 0.0, opt, r));
    f.meta.kind = "state_constraint";
    f.meta.scenario_hash = scenario_hash(s);
    f.meta.tol = opt.tol;
    f.meta.iterations = r.sweeps;
    f.meta.residual = r.residual;
    f.meta.tail_bound = detail::tail_bound(s, value_cap(s));
    return f;
}

/// State-constraint values V_sc(i)(0) on the grid [0, X] of every branch.
inline std::vector<double> state_constraint_values(const Scenario& s, const SolveOptions& opt = {}) {
    std::vector<double> out(s.branches.size());
    const Grid g = Grid::make(0.0, s.domain_radius, s.grid_step);
    parallel_for(s.branches.size(), [&](std::size_t k) {
        out[k] = solve_state_constraint(s, s.branches[k].id, g, opt).slices.front().values.front();
    });
    return out;
}

/// Coupled thermostatic system: branch i lives on [-eps_i, X] (local
/// coordinates) and its exit cost at -eps_i is the value of the next branch
/// in the switching order at +eps_next. Jacobi iteration on the exit costs,
/// started from the supersolution sup l / lambda.
inline ValueField solve_thermostatic(const Scenario& s, const ThermostatConfig& cfg, const SolveOptions& opt = {}) {
    s.check();
    cfg.check(s);
    const std::size_t n = s.branches.size();
    const double max_eps = *std::max_element(cfg.thresholds.begin(), cfg.thresholds.end());
    const double min_eps = *std::min_element(cfg.thresholds.begin(), cfg.thresholds.end());
    const ValidationReport rep = validate_scenario(s, max_eps);
    const double cap = rep.sup_cost / s.lambda;
    const double m = std::max(rep.sup_dynamics, 1e-6);

    std::vector<BranchOperator> ops;
    std::vector<FieldSlice> slices(n);
    std::vector<int> next_index(n);
    std::vector<double> entry(n);
    for (std::size_t k = 0; k < n; ++k) {
        const int id = s.branches[k].id;
        const double eps = cfg.thresholds[k];
        const Grid g = Grid::aligned(eps, s.domain_radius, s.grid_step);
        ops.emplace_back(s, id, g, LeftBoundary::exit_cost, cap, opt.f_floor);
        slices[k].branch = id;
        slices[k].mode = id;
        slices[k].orientation = s.orientation(id);
        slices[k].grid = g;
        slices[k].values.assign(g.size(), cap);
        const int nxt = cfg.next(id);
        next_index[k] = static_cast<int>(s.index_of(nxt));
        entry[k] = cfg.threshold(s, nxt);
    }

    const double inner_tol = opt.tol * 0.1;
    std::vector<std::size_t> max_sweeps(n);
    for (std::size_t k = 0; k < n; ++k)
        max_sweeps[k] = opt.max_sweeps ? opt.max_sweeps : default_max_sweeps(s, ops[k].grid(), cap, inner_tol);
    const std::size_t max_outer =
        opt.max_outer ? opt.max_outer
                      : static_cast<std::size_t>(std::min(
                            1e7, 4.0 * static_cast<double>(n) * std::log(std::max(cap, 1.0) / opt.tol + 10.0) * m /
                                         (s.lambda * 2.0 * min_eps) + 100.0));

    std::vector<double> exits(n, cap), next_exits(n);
    std::vector<double> history;
    std::vector<SweepResult> inner(n);
    std::size_t outer = 0;
    std::size_t total_sweeps = 0;
    bool converged = false;
    while (outer < max_outer) {
        ++outer;
        parallel_for(n, [&](std::size_t k) {
            inner[k] = iterate_to_fixed_point(ops[k], slices[k].values, exits[k], inner_tol, max_sweeps[k]);
        });
        for (std::size_t k = 0; k < n; ++k)
            if (!inner[k].converged)
                throw ConvergenceError("inner solve of branch " + std::to_string(s.branches[k].id) +
                                           " did not converge at outer iteration " + std::to_string(outer),
                                       history);
        for (const auto& r : inner) total_sweeps += r.sweeps;
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const FieldSlice& nx = slices[static_cast<std::size_t>(next_index[k])];
            next_exits[k] = nx.at(entry[k]);
            change = std::max(change, std::fabs(next_exits[k] - exits[k]));
        }
        history.push_back(change);
        exits = next_exits;
        if (change < opt.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("thermostatic iteration did not converge after " + std::to_string(outer) +
                                   " outer iterations (last change " +
                                   std::to_string(history.empty() ? 0.0 : history.back()) + ")",
                               history);
    // Final pass so the field is consistent with the final exit costs.
    for (std::size_t k = 0; k < n; ++k) {
        iterate_to_fixed_point(ops[k], slices[k].values, exits[k], inner_tol, max_sweeps[k]);
        slices[k].policy = ops[k].policy(slices[k].values, exits[k]);
    }

    ValueField field;
    field.slices = std::move(slices);
    field.meta.kind = "thermostatic";
    field.meta.scenario_hash = scenario_hash(s);
    field.meta.thresholds = cfg.thresholds;
    field.meta.order = cfg.order;
    field.meta.tol = opt.tol;
    field.meta.iterations = outer;
    field.meta.inner_sweeps = total_sweeps;
    field.meta.residual = history.back();
    field.meta.residual_history = std::move(history);
    field.meta.tail_bound = cap * std::exp(-s.lambda * s.domain_radius / m);
    return field;
}

}  // namespace junctio
