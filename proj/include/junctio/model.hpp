#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "junctio/expr.hpp"

namespace junctio {

/// Invalid scenario or configuration input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BranchSpec {
    int id = 0;
    Expr dynamics;
    Expr cost;
};

/// Finite sorted sample of the control set, duplicates removed.
class ControlSet {
public:
    ControlSet() = default;
    explicit ControlSet(std::vector<double> values) : values_(std::move(values)) {
        for (double v : values_)
            if (!std::isfinite(v)) throw ConfigError("control values must be finite");
        std::sort(values_.begin(), values_.end());
        values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
        if (values_.empty()) throw ConfigError("control set is empty");
    }

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

private:
    std::vector<double> values_;
};

enum class Topology { twofold, threefold };

/// Network description. Branch ids are {-1, 1} for the twofold junction and
/// {1, 2, 3} for the threefold junction.
///
/// Every solver works in local coordinates y that grow away from the junction
/// on every branch. The twofold branch -1 lives on the native negative axis,
/// so there y = -x and the local dynamics are -f(-y, a).
struct Scenario {
    std::vector<BranchSpec> branches;
    ControlSet controls;
    double lambda = 1.0;
    double domain_radius = 1.0;
    double grid_step = 1e-2;

    Topology topology() const {
        return branches.size() == 2 ? Topology::twofold : Topology::threefold;
    }

    std::size_t index_of(int id) const {
        for (std::size_t k = 0; k < branches.size(); ++k)
            if (branches[k].id == id) return k;
        throw ConfigError("unknown branch id " + std::to_string(id));
    }

    const BranchSpec& branch(int id) const { return branches[index_of(id)]; }

    std::vector<int> ids() const {
        std::vector<int> out;
        for (const auto& b : branches) out.push_back(b.id);
        return out;
    }

    /// +1, or -1 for the mirrored twofold branch.
    double orientation(int id) const {
        return (topology() == Topology::twofold && id == -1) ? -1.0 : 1.0;
    }

    double local_dynamics(int id, double y, double a) const {
        const double s = orientation(id);
        return s * branch(id).dynamics(s * y, a);
    }

    double local_cost(int id, double y, double a) const {
        return branch(id).cost(orientation(id) * y, a);
    }

    /// Structural checks. Assumption checks live in validate_scenario.
    void check() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
        if (!(domain_radius > 0.0) || !std::isfinite(domain_radius))
            throw ConfigError("domain_radius must be positive");
        if (!(grid_step > 0.0) || !std::isfinite(grid_step))
            throw ConfigError("grid_step must be positive");
        if (grid_step >= domain_radius) throw ConfigError("grid_step must be smaller than domain_radius");
        if (branches.size() < 2 || branches.size() > 3)
            throw ConfigError("a junction needs two or three branches");
        if (controls.size() == 0) throw ConfigError("control set is empty");
        std::vector<int> got = ids();
        std::sort(got.begin(), got.end());
        const std::vector<int> want =
            branches.size() == 2 ? std::vector<int>{-1, 1} : std::vector<int>{1, 2, 3};
        if (got != want)
            throw ConfigError(branches.size() == 2 ? "twofold branch ids must be -1 and 1"
                                                   : "threefold branch ids must be 1, 2 and 3");
    }
};

/// Threshold vector and cyclic switching order of the thermostatic system.
/// thresholds[k] belongs to scenario.branches[k].
struct ThermostatConfig {
    std::vector<double> thresholds;
    std::vector<int> order;

    static ThermostatConfig twofold(double eps) { return {{eps, eps}, {1, -1}}; }

    static ThermostatConfig uniform(const Scenario& s, double eps) {
        ThermostatConfig c;
        c.thresholds.assign(s.branches.size(), eps);
        c.order = s.topology() == Topology::twofold ? std::vector<int>{1, -1} : std::vector<int>{1, 2, 3};
        return c;
    }

    double threshold(const Scenario& s, int id) const { return thresholds.at(s.index_of(id)); }

    /// Branch entered when branch `id` exits through its threshold.
    int next(int id) const {
        for (std::size_t k = 0; k < order.size(); ++k)
            if (order[k] == id) return order[(k + 1) % order.size()];
        throw ConfigError("branch " + std::to_string(id) + " missing from switching order");
    }

    void check(const Scenario& s) const {
        if (thresholds.size() != s.branches.size())
            throw ConfigError("one threshold per branch is required");
        for (double e : thresholds) {
            if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("thresholds must be positive");
            if (e >= s.domain_radius) throw ConfigError("thresholds must be below domain_radius");
        }
        if (s.topology() == Topology::twofold && thresholds[0] != thresholds[1])
            throw ConfigError("the twofold relay uses one symmetric threshold");
        std::vector<int> a = order, b = s.ids();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) throw ConfigError("switching order must list every branch exactly once");
    }
};

struct BranchValidation {
    int id = 0;
    bool cost_nonnegative = true;
    double min_cost = 0.0;
    double min_cost_x = 0.0;  // native coordinate of the smallest sampled cost
    double min_cost_a = 0.0;
    double lipschitz = 0.0;   // estimated Lipschitz constant of f in x
    bool controllable = false;
    std::optional<double> inward_control;   // a with f(0,a) pointing toward the junction
    std::optional<double> outward_control;
    double sup_dynamics = 0.0;
    double sup_cost = 0.0;
};

struct ValidationReport {
    std::vector<BranchValidation> branches;
    double sup_dynamics = 0.0;  // M
    double sup_cost = 0.0;
    bool ok = true;
    std::vector<std::string> messages;
};

/// Samples each branch on its native grid: [-left_extent, X] for branch ids
/// >= 1 and [-X, left_extent] for the twofold branch -1.
/// Throws EvalError on non-finite evaluations.
inline ValidationReport validate_scenario(const Scenario& s, double left_extent = 0.0) {
    s.check();
    ValidationReport rep;
    const double h = s.grid_step;
    for (const auto& b : s.branches) {
        BranchValidation v;
        v.id = b.id;
        v.min_cost = std::numeric_limits<double>::infinity();
        const double sign = s.orientation(b.id);
        const double span = s.domain_radius + left_extent;
        const auto n = static_cast<std::size_t>(std::llround(span / h));
        const double step = span / static_cast<double>(n);
        for (double a : s.controls) {
            double prev_f = 0.0;
            for (std::size_t k = 0; k <= n; ++k) {
                const double y = -left_extent + static_cast<double>(k) * step;
                const double x = sign * y;
                const double f = b.dynamics(x, a);
                const double l = b.cost(x, a);
                if (!std::isfinite(f) || !std::isfinite(l))
                    throw EvalError("non-finite dynamics or cost on branch " + std::to_string(b.id) +
                                    " at x=" + std::to_string(x));
                if (l < v.min_cost) {
                    v.min_cost = l;
                    v.min_cost_x = x;
                    v.min_cost_a = a;
                }
                v.sup_dynamics = std::max(v.sup_dynamics, std::fabs(f));
                v.sup_cost = std::max(v.sup_cost, l);
                if (k > 0) v.lipschitz = std::max(v.lipschitz, std::fabs(f - prev_f) / step);
                prev_f = f;
            }
            const double f0 = s.local_dynamics(b.id, 0.0, a);
            if (f0 < 0.0 && !v.inward_control) v.inward_control = a;
            if (f0 > 0.0 && !v.outward_control) v.outward_control = a;
        }
        v.cost_nonnegative = v.min_cost >= 0.0;
        v.controllable = v.inward_control.has_value() && v.outward_control.has_value();
        if (!v.cost_nonnegative) {
            rep.ok = false;
            rep.messages.push_back("branch " + std::to_string(b.id) + ": negative cost " +
                                   std::to_string(v.min_cost) + " at x=" + std::to_string(v.min_cost_x) +
                                   ", a=" + std::to_string(v.min_cost_a));
        }
        if (!v.controllable) {
            rep.ok = false;
            rep.messages.push_back("branch " + std::to_string(b.id) +
                                   ": not controllable at the junction (needs f(0,a-) < 0 < f(0,a+))");
        }
        rep.sup_dynamics = std::max(rep.sup_dynamics, v.sup_dynamics);
        rep.sup_cost = std::max(rep.sup_cost, v.sup_cost);
        rep.branches.push_back(v);
    }
    return rep;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Canonical text form of a scenario (expressions in printed form).
inline std::string canonical_text(const Scenario& s) {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string out = "lambda=" + num(s.lambda) + ";radius=" + num(s.domain_radius) +
                      ";step=" + num(s.grid_step) + ";controls=";
    for (double a : s.controls) out += num(a) + ",";
    for (const auto& b : s.branches)
        out += ";branch " + std::to_string(b.id) + ":" + b.dynamics.str() + "|" + b.cost.str();
    return out;
}

inline std::uint64_t scenario_hash(const Scenario& s) { return fnv1a64(canonical_text(s)); }

/// sup of the running cost over [-left_extent, X] per branch, divided by lambda.
inline double value_cap(const Scenario& s, double left_extent = 0.0) {
    return validate_scenario(s, left_extent).sup_cost / s.lambda;
}

}  // namespace junctio
