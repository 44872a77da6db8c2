#pragma once

// Delayed relay and hybrid trajectory integration in native coordinates.
//
// Twofold relay with threshold eps: mode 1 switches to -1 when x drops below
// -eps, mode -1 switches to 1 when x exceeds +eps; x is continuous.
// Threefold relay: mode i switches to the next mode of the cyclic order when
// x reaches -eps_i, and x restarts at +eps_next.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "junctio/model.hpp"

namespace junctio {

struct RelayState {
    int mode = 1;
    double x = 0.0;
};

/// The coherence condition of the relay output.
inline bool coherent(const Scenario& s, const ThermostatConfig& cfg, const RelayState& st) {
    const std::vector<int> ids = s.ids();
    if (std::find(ids.begin(), ids.end(), st.mode) == ids.end()) return false;
    if (!std::isfinite(st.x)) return false;
    const double eps = cfg.threshold(s, st.mode);
    if (s.topology() == Topology::twofold) {
        if (st.x > eps && st.mode != 1) return false;
        if (st.x < -eps && st.mode != -1) return false;
        return true;
    }
    return st.x >= -eps;
}

/// Moves the relay input to x_new and applies the switching rule once.
inline RelayState relay_step(const Scenario& s, const ThermostatConfig& cfg, const RelayState& st, double x_new) {
    if (!coherent(s, cfg, st))
        throw std::invalid_argument("incoherent relay state (mode " + std::to_string(st.mode) +
                                    ", x=" + std::to_string(st.x) + ")");
    const double eps = cfg.threshold(s, st.mode);
    if (s.topology() == Topology::twofold) {
        if (st.mode == 1 && x_new < -eps) return {-1, x_new};
        if (st.mode == -1 && x_new > eps) return {1, x_new};
        return {st.mode, x_new};
    }
    if (x_new <= -eps) {
        const int nxt = cfg.next(st.mode);
        return {nxt, cfg.threshold(s, nxt)};
    }
    return {st.mode, x_new};
}

/// Piecewise-constant control schedule. A segment either applies one control
/// in every mode or one control per branch (indexed like scenario.branches).
struct ControlSegment {
    double duration = std::numeric_limits<double>::infinity();
    std::vector<double> controls;
};

class ControlSchedule {
public:
    ControlSchedule() = default;
    explicit ControlSchedule(std::vector<ControlSegment> segments) : segments_(std::move(segments)) {
        if (segments_.empty()) throw std::invalid_argument("control schedule needs at least one segment");
        double t = 0.0;
        for (const auto& seg : segments_) {
            if (seg.controls.empty()) throw std::invalid_argument("schedule segment without controls");
            if (!(seg.duration >= 0.0)) throw std::invalid_argument("segment durations must be nonnegative");
            t += seg.duration;
            ends_.push_back(t);
        }
    }

    static ControlSchedule constant(double a) {
        return ControlSchedule(std::vector<ControlSegment>{{std::numeric_limits<double>::infinity(), {a}}});
    }
    static ControlSchedule feedback(std::vector<double> per_mode) {
        return ControlSchedule(std::vector<ControlSegment>{{std::numeric_limits<double>::infinity(), std::move(per_mode)}});
    }

    const std::vector<ControlSegment>& segments() const noexcept { return segments_; }

    std::size_t segment_at(double t) const {
        for (std::size_t k = 0; k < ends_.size(); ++k)
            if (t < ends_[k]) return k;
        return ends_.size() - 1;
    }

    double control(double t, std::size_t mode_index) const {
        const auto& c = segments_[segment_at(t)].controls;
        return c.size() == 1 ? c[0] : c.at(mode_index);
    }

    /// First segment boundary strictly after t, or +inf.
    double next_boundary(double t) const {
        for (double e : ends_)
            if (e > t) return e;
        return std::numeric_limits<double>::infinity();
    }

    /// The same schedule seen from time t0 onwards.
    ControlSchedule shifted(double t0) const {
        std::vector<ControlSegment> out;
        double start = 0.0;
        for (std::size_t k = 0; k < segments_.size(); ++k) {
            const double end = ends_[k];
            if (end > t0 || k + 1 == segments_.size()) {
                ControlSegment seg = segments_[k];
                seg.duration = end - std::max(start, t0);
                out.push_back(seg);
            }
            start = end;
        }
        return ControlSchedule(std::move(out));
    }

private:
    std::vector<ControlSegment> segments_;
    std::vector<double> ends_;
};

struct TrajectorySample {
    double t = 0.0;
    double x = 0.0;
    int mode = 0;
    double control = 0.0;
    double running_cost = 0.0;  // discounted cost accumulated on [0, t]
    bool switched = false;      // first sample after a switch event
};

struct SwitchEvent {
    double t = 0.0;
    int from_mode = 0;
    int to_mode = 0;
    double x_before = 0.0;
    double x_after = 0.0;
};

struct TrajectoryRecord {
    std::vector<TrajectorySample> samples;
    std::vector<SwitchEvent> switch_events;
    double discounted_cost = 0.0;
    double horizon = 0.0;
    RelayState final_state;
};

/// Explicit Euler integrator of the hybrid system on the time grid k * dt
/// with threshold events located by linear interpolation. The cost on a
/// sub-interval [t, t + tau] uses the exact discount weight
/// e^{-lambda t} (1 - e^{-lambda tau}) / lambda.
class HybridIntegrator {
public:
    HybridIntegrator(const Scenario& s, const ThermostatConfig& cfg, RelayState start, double dt)
        : s_(s), cfg_(cfg), state_(start), dt_(dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
        if (!coherent(s, cfg, start))
            throw std::invalid_argument("incoherent start state (mode " + std::to_string(start.mode) +
                                        ", x=" + std::to_string(start.x) + ")");
        twofold_ = s.topology() == Topology::twofold;
    }

    double time() const noexcept { return t_; }
    double cost() const noexcept { return cost_; }
    const RelayState& state() const noexcept { return state_; }

    /// Integrates up to t_end with per-branch controls. Stops early and
    /// returns false when cost + e^{-lambda t} * floor_rate / lambda reaches
    /// abort_above.
    bool advance(const std::vector<double>& per_mode, double t_end, TrajectoryRecord* rec = nullptr,
                 double abort_above = std::numeric_limits<double>::infinity(), double floor_rate = 0.0) {
        const double lambda = s_.lambda;
        while (t_ < t_end) {
            if (cost_ + std::exp(-lambda * t_) * floor_rate / lambda >= abort_above) return false;
            const double grid_next = (std::floor(t_ / dt_ + 1e-9) + 1.0) * dt_;
            const double t1 = std::min(grid_next, t_end);
            double remaining = t1 - t_;
            while (remaining > 0.0) {
                const std::size_t mi = s_.index_of(state_.mode);
                const double a = per_mode.size() == 1 ? per_mode[0] : per_mode.at(mi);
                const BranchSpec& b = s_.branches[mi];
                const double f = b.dynamics(state_.x, a);
                const double l = b.cost(state_.x, a);
                if (!std::isfinite(f) || !std::isfinite(l))
                    throw EvalError("non-finite dynamics or cost at x=" + std::to_string(state_.x));
                const double x_new = state_.x + remaining * f;
                double tau = remaining;
                bool event = false;
                double x_hit = 0.0;
                const double eps = cfg_.threshold(s_, state_.mode);
                if (twofold_) {
                    if (state_.mode == 1 && x_new < -eps) x_hit = -eps, event = true;
                    else if (state_.mode == -1 && x_new > eps) x_hit = eps, event = true;
                } else if (x_new <= -eps) {
                    x_hit = -eps, event = true;
                }
                if (event) tau = f == 0.0 ? 0.0 : std::clamp((x_hit - state_.x) / f, 0.0, remaining);
                cost_ += l * std::exp(-lambda * t_) * -std::expm1(-lambda * tau) / lambda;
                t_ = (tau == remaining) ? t1 : t_ + tau;
                remaining = (tau == remaining) ? 0.0 : t1 - t_;
                if (!event) {
                    state_.x = x_new;
                    continue;
                }
                const RelayState before{state_.mode, x_hit};
                if (twofold_) {
                    state_ = {-state_.mode, x_hit};
                } else {
                    const int nxt = cfg_.next(state_.mode);
                    state_ = {nxt, cfg_.threshold(s_, nxt)};
                }
                ++switches_;
                if (rec) {
                    rec->switch_events.push_back({t_, before.mode, state_.mode, before.x, state_.x});
                    rec->samples.push_back({t_, state_.x, state_.mode, control_for(per_mode), cost_, true});
                }
            }
            if (rec) rec->samples.push_back({t_, state_.x, state_.mode, control_for(per_mode), cost_, false});
        }
        return true;
    }

    std::size_t switches() const noexcept { return switches_; }

private:
    double control_for(const std::vector<double>& per_mode) const {
        return per_mode.size() == 1 ? per_mode[0] : per_mode.at(s_.index_of(state_.mode));
    }

    const Scenario& s_;
    const ThermostatConfig& cfg_;
    RelayState state_;
    double dt_;
    double t_ = 0.0;
    double cost_ = 0.0;
    std::size_t switches_ = 0;
    bool twofold_ = true;
};

/// Integrates the hybrid system under a control schedule up to the horizon.
inline TrajectoryRecord simulate(const Scenario& s, const ThermostatConfig& cfg, const RelayState& start,
                                 const ControlSchedule& policy, double horizon, double dt) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
    cfg.check(s);
    HybridIntegrator integ(s, cfg, start, dt);
    TrajectoryRecord rec;
    rec.horizon = horizon;
    rec.samples.push_back({0.0, start.x, start.mode, policy.control(0.0, s.index_of(start.mode)), 0.0, false});
    while (integ.time() < horizon) {
        const double t = integ.time();
        const std::size_t seg = policy.segment_at(t);
        const double t_end = std::min(horizon, policy.next_boundary(t));
        integ.advance(policy.segments()[seg].controls, t_end, &rec);
    }
    if (!rec.samples.empty())
        rec.samples.back().control = policy.control(integ.time(), s.index_of(integ.state().mode));
    rec.discounted_cost = integ.cost();
    rec.final_state = integ.state();
    return rec;
}

class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RolloutOptions {
    std::size_t segments = 2;                 // constant-control segments, the last one unbounded
    std::vector<double> durations;            // candidate lengths of the bounded segments
    std::size_t max_rollouts = 2'000'000;     // hard cap on enumerated schedules
};

struct RolloutResult {
    TrajectoryRecord record;
    double cost = std::numeric_limits<double>::infinity();
    ControlSchedule schedule;
    std::size_t evaluated = 0;
};

inline std::vector<double> default_rollout_durations() { return {0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2}; }

/// Exhaustive search over schedules whose segments assign one control per
/// mode, with quantised durations. Branch and bound on the running cost,
/// which is valid because costs are nonnegative. The returned cost is an
/// upper bound on the thermostatic value at `start` (up to the horizon tail).
inline RolloutResult best_rollout(const Scenario& s, const ThermostatConfig& cfg, const RelayState& start,
                                  double horizon, double dt, const RolloutOptions& opt = {}) {
    if (opt.segments == 0 || opt.segments > 6) throw BudgetError("switch budget must be between 1 and 6 segments");
    cfg.check(s);
    std::vector<double> durations = opt.durations.empty() ? default_rollout_durations() : opt.durations;
    std::sort(durations.begin(), durations.end());
    const std::size_t nb = s.branches.size();

    std::vector<std::vector<double>> actions;
    std::vector<double> current(nb);
    std::function<void(std::size_t)> build = [&](std::size_t k) {
        if (k == nb) {
            actions.push_back(current);
            return;
        }
        for (double a : s.controls) {
            current[k] = a;
            build(k + 1);
        }
    };
    build(0);

    double total = static_cast<double>(actions.size());
    for (std::size_t k = 1; k < opt.segments; ++k) total *= static_cast<double>(actions.size() * durations.size());
    if (total > static_cast<double>(opt.max_rollouts))
        throw BudgetError("rollout enumeration needs " + std::to_string(static_cast<long long>(total)) +
                          " schedules, above the cap of " + std::to_string(opt.max_rollouts));

    const ValidationReport rep = validate_scenario(s, *std::max_element(cfg.thresholds.begin(), cfg.thresholds.end()));
    double floor_rate = std::numeric_limits<double>::infinity();
    for (const auto& b : rep.branches) floor_rate = std::min(floor_rate, std::max(0.0, b.min_cost));

    RolloutResult best;
    std::vector<ControlSegment> chosen;
    std::function<void(const HybridIntegrator&, std::size_t)> search = [&](const HybridIntegrator& prefix,
                                                                           std::size_t depth) {
        const bool last = depth + 1 == opt.segments;
        for (const auto& act : actions) {
            if (last) {
                HybridIntegrator run = prefix;
                ++best.evaluated;
                if (run.advance(act, horizon, nullptr, best.cost, floor_rate) && run.cost() < best.cost) {
                    best.cost = run.cost();
                    chosen.push_back({std::numeric_limits<double>::infinity(), act});
                    best.schedule = ControlSchedule(chosen);
                    chosen.pop_back();
                }
                continue;
            }
            HybridIntegrator run = prefix;
            for (double d : durations) {
                if (!run.advance(act, std::min(horizon, prefix.time() + d), nullptr, best.cost, floor_rate)) break;
                chosen.push_back({run.time() - prefix.time(), act});
                search(run, depth + 1);
                chosen.pop_back();
                if (run.time() >= horizon) break;
            }
        }
    };
    HybridIntegrator root(s, cfg, start, dt);
    search(root, 0);

    best.record = simulate(s, cfg, start, best.schedule, horizon, dt);
    best.cost = best.record.discounted_cost;
    return best;
}

}  // namespace junctio
