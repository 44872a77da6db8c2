#pragma once

// Measurable checks of the limit theory: viscosity residuals, Ishii junction
// conditions, maximal subsolution, convergence studies and solver versus
// simulation consistency.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "junctio/grid.hpp"
#include "junctio/hjb.hpp"
#include "junctio/junction.hpp"
#include "junctio/model.hpp"
#include "junctio/parallel.hpp"
#include "junctio/relay.hpp"

namespace junctio {

/// Scheme-error model: residual tolerances are (c1 h + c2 fd) K with
/// K = M * curvature + lambda * slope, both estimated from the field itself
/// with stride-8 differences so that isolated spikes do not inflate them.
struct ResidualOptions {
    double fd_step = 0.0;  // 0: the grid step of each slice
    double c1 = 1.0;
    double c2 = 1.0;
    std::size_t stride = 8;
};

struct FieldShape {
    double curvature = 0.0;
    double slope = 0.0;
    double magnitude = 0.0;
    double step = 0.0;
};

inline FieldShape field_shape(const ValueField& field, std::size_t stride = 8) {
    FieldShape sh;
    for (const auto& sl : field.slices) {
        const std::size_t n = sl.values.size();
        const std::size_t st = n > 2 * stride ? stride : 1;
        const double h = sl.grid.step() * static_cast<double>(st);
        sh.step = std::max(sh.step, sl.grid.step());
        // The junction node is left out: a jump there must not widen the
        // tolerance used to detect it.
        for (std::size_t k = 0; k < n; ++k) {
            sh.magnitude = std::max(sh.magnitude, std::fabs(sl.values[k]));
            if (k == 0) continue;
            if (k + st < n) sh.slope = std::max(sh.slope, std::fabs(sl.values[k + st] - sl.values[k]) / h);
            if (k > st && k + st < n)
                sh.curvature = std::max(
                    sh.curvature, std::fabs(sl.values[k + st] - 2.0 * sl.values[k] + sl.values[k - st]) / (h * h));
        }
    }
    return sh;
}

inline double residual_tolerance(const Scenario& s, const ValueField& field, const ResidualOptions& opt = {}) {
    const FieldShape sh = field_shape(field, opt.stride);
    const double fd = opt.fd_step > 0.0 ? opt.fd_step : sh.step;
    const double m = validate_scenario(s).sup_dynamics;
    const double k = m * sh.curvature + s.lambda * sh.slope;
    return (opt.c1 * sh.step + opt.c2 * fd) * k + 1e-9 * std::max(1.0, sh.magnitude);
}

struct ResidualReport {
    std::vector<std::pair<int, double>> interior_residuals;  // sup |lambda V + H| per branch
    double interior_max = 0.0;
    double interior_signed_max = -std::numeric_limits<double>::infinity();  // sup (lambda V + H)
    int worst_branch = 0;
    double worst_x = 0.0;  // local coordinate
    std::vector<std::pair<int, double>> junction_terms;  // lambda V(0) + H_i(0, D+V_i(0))
    double junction_min = 0.0;
    double junction_max = 0.0;
    double tolerance = 0.0;

    bool interior_ok() const { return interior_max <= tolerance; }
    bool ishii_ok() const { return junction_min <= tolerance && junction_max >= -tolerance; }
    bool ok() const { return interior_ok() && ishii_ok(); }
};

namespace detail {

/// lambda V + H with upwind one-sided differences chosen per control.
inline double node_residual(const Scenario& s, const FieldSlice& sl, double y, double fd) {
    const double v = sl.at(y);
    const double back = (v - sl.at(y - fd)) / fd;
    const double fwd = (sl.at(y + fd) - v) / fd;
    double h = -std::numeric_limits<double>::infinity();
    for (double a : s.controls) {
        const double f = s.local_dynamics(sl.branch, y, a);
        const double p = f < 0.0 ? back : (f > 0.0 ? fwd : 0.0);
        h = std::max(h, -f * p - s.local_cost(sl.branch, y, a));
    }
    return s.lambda * v + h;
}

inline double right_slope(const FieldSlice& sl, double fd) { return (sl.at(fd) - sl.at(0.0)) / fd; }

}  // namespace detail

/// Residuals of lambda V + H_i(x, DV) = 0 at interior nodes of every slice
/// (0 < y, y + fd <= right end) and the Ishii junction terms at y = 0.
inline ResidualReport check_viscosity(const Scenario& s, const ValueField& field, const ResidualOptions& opt = {}) {
    ResidualReport r;
    r.tolerance = residual_tolerance(s, field, opt);
    r.junction_min = std::numeric_limits<double>::infinity();
    r.junction_max = -std::numeric_limits<double>::infinity();
    for (const auto& sl : field.slices) {
        const double fd = opt.fd_step > 0.0 ? opt.fd_step : sl.grid.step();
        double worst = 0.0;
        for (std::size_t k = 0; k < sl.grid.size(); ++k) {
            const double y = sl.grid.node(k);
            if (y <= 1e-12 || y - fd < sl.grid.left - 1e-12 || y + fd > sl.grid.right + 1e-12) continue;
            const double res = detail::node_residual(s, sl, y, fd);
            r.interior_signed_max = std::max(r.interior_signed_max, res);
            if (std::fabs(res) > worst) worst = std::fabs(res);
            if (std::fabs(res) > r.interior_max) {
                r.interior_max = std::fabs(res);
                r.worst_branch = sl.branch;
                r.worst_x = y;
            }
        }
        r.interior_residuals.emplace_back(sl.branch, worst);
        if (sl.grid.contains(0.0) && sl.grid.contains(fd)) {
            const double term = s.lambda * sl.at(0.0) + local_hamiltonian(s, sl.branch, 0.0, detail::right_slope(sl, fd));
            r.junction_terms.emplace_back(sl.branch, term);
            r.junction_min = std::min(r.junction_min, term);
            r.junction_max = std::max(r.junction_max, term);
        }
    }
    return r;
}

/// Which test functions the junction condition of the limit problem admits.
///  - twofold: C^1 functions across both branches (local slopes q and -q);
///  - threefold uniform: continuous functions with arbitrary branch slopes,
///    probed with the slopes of the limiting cycle profile;
///  - threefold non-uniform: C^1 functions across the pair selected by the
///    minimiser.
struct JunctionTests {
    std::optional<std::pair<int, int>> pair;
    std::vector<std::vector<std::pair<int, double>>> cycle_slopes;
};

inline JunctionTests junction_tests(const Scenario& s, const JunctionReport& rep) {
    JunctionTests t;
    if (rep.mode == JunctionMode::twofold) {
        t.pair = std::pair{1, -1};
        return t;
    }
    if (rep.argmin.rfind("sigma=", 0) == 0 && rep.argmin.size() == 8) {
        t.pair = std::pair{rep.argmin[6] - '0', rep.argmin[7] - '0'};
        return t;
    }
    if (rep.u123 && rep.u123->feasible()) {
        const double u = rep.u123->value;
        for (const auto& c : rep.u123->ties) {
            if (c.sigma != "123") continue;
            std::vector<std::pair<int, double>> slopes;
            bool ok = true;
            for (std::size_t k = 0; k < c.branches.size(); ++k) {
                const double speed = -s.local_dynamics(c.branches[k], 0.0, c.controls[k]);
                if (!(speed > 0.0)) {
                    ok = false;
                    break;
                }
                slopes.emplace_back(c.branches[k],
                                    (s.local_cost(c.branches[k], 0.0, c.controls[k]) - s.lambda * u) / speed);
            }
            if (ok) t.cycle_slopes.push_back(std::move(slopes));
        }
    }
    return t;
}

namespace detail {

/// {q : lambda u - f(0,a) (sign q) - l(0,a) <= tol for all a}, an interval.
inline std::pair<double, double> sublevel_interval(const Scenario& s, int id, double u, double sign, double tol) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (double a : s.controls) {
        const double slope = -s.local_dynamics(id, 0.0, a) * sign;
        const double c = s.lambda * u - s.local_cost(id, 0.0, a) - tol;
        // c + slope * q <= 0
        if (slope > 0.0) hi = std::min(hi, -c / slope);
        else if (slope < 0.0) lo = std::max(lo, -c / slope);
        else if (c > 0.0) return {1.0, -1.0};
    }
    return {lo, hi};
}

}  // namespace detail

struct SubsolutionCheck {
    bool ok = true;
    std::string reason;
    double interior_signed_max = 0.0;
    double junction_min = 0.0;
    double junction_spread = 0.0;
    double tolerance = 0.0;
};

/// Discrete subsolution test of a field against the limit problem's
/// junction structure.
inline SubsolutionCheck check_subsolution(const Scenario& s, const ValueField& u, const JunctionTests& tests,
                                          const ResidualOptions& opt = {}) {
    SubsolutionCheck c;
    const ResidualReport r = check_viscosity(s, u, opt);
    c.tolerance = r.tolerance;
    c.interior_signed_max = r.interior_signed_max;
    c.junction_min = r.junction_min;

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& sl : u.slices) {
        lo = std::min(lo, sl.at(0.0));
        hi = std::max(hi, sl.at(0.0));
    }
    c.junction_spread = hi - lo;
    auto fail = [&](std::string why) {
        if (c.ok) c.reason = std::move(why);
        c.ok = false;
    };
    if (c.junction_spread > c.tolerance) fail("discontinuous at the junction");
    if (r.interior_signed_max > c.tolerance) fail("interior subsolution inequality violated");
    if (r.junction_min > c.tolerance) fail("junction condition violated at the one-sided slopes");

    const double u0 = lo;
    const double tol = c.tolerance;
    auto slope = [&](int id) {
        const FieldSlice& sl = u.slice(id);
        return detail::right_slope(sl, opt.fd_step > 0.0 ? opt.fd_step : sl.grid.step());
    };
    if (tests.pair) {
        // Test slopes q on branch i and -q on branch j with u - psi maximal at 0.
        const auto [i, j] = *tests.pair;
        const double qa = slope(i), qb = -slope(j);
        if (qa <= qb) {
            const auto [lo1, hi1] = detail::sublevel_interval(s, i, u0, 1.0, tol);
            const auto [lo2, hi2] = detail::sublevel_interval(s, j, u0, -1.0, tol);
            // [qa, qb] must be covered by [lo1, hi1] and [lo2, hi2].
            auto covered = [&]() {
                double cur = qa;
                for (int pass = 0; pass < 2; ++pass) {
                    if (lo1 <= cur && cur <= hi1) cur = std::max(cur, hi1);
                    if (lo2 <= cur && cur <= hi2) cur = std::max(cur, hi2);
                    if (cur >= qb) return true;
                }
                return cur >= qb;
            };
            if (!covered()) fail("junction condition violated for a test function across branches " +
                                 std::to_string(i) + " and " + std::to_string(j));
        }
    }
    for (const auto& vec : tests.cycle_slopes) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [id, vbar] : vec) {
            const double q = std::max(slope(id), vbar);
            best = std::min(best, s.lambda * u0 + local_hamiltonian(s, id, 0.0, q));
        }
        if (best > tol) fail("junction condition violated for the cycle-profile test function");
    }
    return c;
}

struct SubsolutionCandidate {
    std::string recipe;  // "constant", "bump", "junction_field", "reference"
    std::string label;
    ValueField field;
};

namespace detail {

inline ValueField map_field(const ValueField& base, const std::function<double(double, double)>& fn) {
    ValueField out = base;
    for (auto& sl : out.slices)
        for (std::size_t k = 0; k < sl.values.size(); ++k) sl.values[k] = fn(sl.grid.node(k), sl.values[k]);
    return out;
}

}  // namespace detail

/// Candidate subsolutions on the grid of the limit field V:
///  (i)   constants c = k/10 * min_i inf l_i / lambda;
///  (ii)  V - beta (2 + sin(k y + theta)) with k <= lambda / M;
///  (iii) Dirichlet fields with data equal to fractions of every junction
///        ingredient (cycle values and state-constraint values);
/// plus V itself.
inline std::vector<SubsolutionCandidate> generate_candidates(const Scenario& s, const ValueField& v,
                                                             const JunctionReport& rep, const SolveOptions& opt = {}) {
    std::vector<SubsolutionCandidate> out;
    const ValidationReport val = validate_scenario(s);
    double floor = std::numeric_limits<double>::infinity();
    for (const auto& b : val.branches) floor = std::min(floor, std::max(0.0, b.min_cost));
    floor /= s.lambda;
    for (int k = 0; k <= 10; ++k) {
        const double c = floor * k / 10.0;
        out.push_back({"constant", "constant " + std::to_string(c), detail::map_field(v, [c](double, double) { return c; })});
    }

    const double m = std::max(val.sup_dynamics, 1e-12);
    const double scale = std::max(1e-3, std::fabs(rep.v_junction));
    for (double beta : {0.01 * scale, 0.1 * scale})
        for (double freq : {s.lambda / m, 0.5 * s.lambda / m})
            for (double theta : {0.0, 1.5707963267948966}) {
                char label[96];
                std::snprintf(label, sizeof label, "bump beta=%g k=%g theta=%g", beta, freq, theta);
                out.push_back({"bump", label, detail::map_field(v, [=](double y, double val_) {
                                   return val_ - beta * (2.0 + std::sin(freq * y + theta));
                               })});
            }

    const Grid g = v.slices.front().grid;
    for (const auto& ing : rep.ingredients) {
        if (!std::isfinite(ing.value)) continue;
        for (double frac : {0.25, 0.5, 0.75, 0.9, 1.0}) {
            const double datum = frac * ing.value;
            ValueField f;
            f.slices.resize(s.branches.size());
            for (std::size_t k = 0; k < s.branches.size(); ++k)
                f.slices[k] = solve_branch_dirichlet(s, s.branches[k].id, g, datum, opt).slices.front();
            char label[96];
            std::snprintf(label, sizeof label, "%s datum x%.2f", ing.tag.c_str(), frac);
            out.push_back({"junction_field", label, std::move(f)});
        }
    }
    out.push_back({"reference", "V", v});
    return out;
}

struct CandidateVerdict {
    std::string recipe;
    std::string label;
    SubsolutionCheck subsolution;
    double max_excess = 0.0;  // sup (candidate - V)
    bool below = true;
    double junction_value = 0.0;
};

struct MaximalSubsolutionReport {
    std::vector<CandidateVerdict> verdicts;
    double tolerance = 0.0;
    std::size_t subsolutions = 0;
    std::size_t recipes_represented = 0;
    bool all_below = true;
    bool reference_attained = false;  // a subsolution equals V at the junction within tolerance
};

/// Every candidate that passes the subsolution test must lie below V.
inline MaximalSubsolutionReport check_maximal_subsolution(const Scenario& s, const ValueField& v,
                                                          const JunctionReport& rep,
                                                          const std::vector<SubsolutionCandidate>& candidates,
                                                          const ResidualOptions& opt = {}) {
    MaximalSubsolutionReport out;
    const JunctionTests tests = junction_tests(s, rep);
    out.tolerance = residual_tolerance(s, v, opt);
    const double v0 = v.slices.front().at(0.0);
    std::vector<std::string> recipes;
    out.verdicts.resize(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t idx) {
        const auto& cand = candidates[idx];
        CandidateVerdict cv;
        cv.recipe = cand.recipe;
        cv.label = cand.label;
        cv.subsolution = check_subsolution(s, cand.field, tests, opt);
        cv.max_excess = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < cand.field.slices.size(); ++b) {
            const auto& a = cand.field.slices[b];
            const auto& ref = v.slice(a.branch);
            for (std::size_t k = 0; k < a.values.size(); ++k)
                cv.max_excess = std::max(cv.max_excess, a.values[k] - ref.at(a.grid.node(k)));
        }
        cv.below = cv.max_excess <= out.tolerance;
        cv.junction_value = cand.field.slices.front().at(0.0);
        out.verdicts[idx] = std::move(cv);
    });
    for (const auto& cv : out.verdicts) {
        if (!cv.subsolution.ok) continue;
        ++out.subsolutions;
        if (std::find(recipes.begin(), recipes.end(), cv.recipe) == recipes.end()) recipes.push_back(cv.recipe);
        if (!cv.below) out.all_below = false;
        if (std::fabs(cv.junction_value - v0) <= out.tolerance) out.reference_attained = true;
    }
    out.recipes_represented = recipes.size();
    return out;
}

/// Constant C of the bound C * max eps + 5h on |V_eps(0, i) - V(0)|:
/// C = 2 L / m with L the largest junction cost of an inward control and m
/// the slowest branch's fastest inward speed at the junction.
inline double junction_rate_constant(const Scenario& s) {
    double lmax = 0.0;
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : s.branches) {
        double fastest = 0.0;
        for (double a : s.controls) {
            const double f = s.local_dynamics(b.id, 0.0, a);
            if (f < 0.0) {
                fastest = std::max(fastest, -f);
                lmax = std::max(lmax, s.local_cost(b.id, 0.0, a));
            }
        }
        m = std::min(m, fastest);
    }
    if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * lmax / m;
}

struct ConvergenceStudy {
    std::string family;
    std::vector<double> epsilons;
    std::vector<double> sup_errors;
    std::vector<double> junction_gaps;
    std::vector<std::vector<std::pair<int, double>>> junction_values;  // V_eps(0, i)
    double empirical_order = 0.0;
    double limit_value = 0.0;
    std::string limit_tag;
    double rate_constant = 0.0;
    double grid_step = 0.0;
    std::vector<bool> within_bound;  // |V_eps(0,i) - V(0)| <= C max eps + 5h for all i

    bool errors_decreasing() const {
        for (std::size_t k = 1; k < sup_errors.size(); ++k)
            if (!(sup_errors[k] < sup_errors[k - 1])) return false;
        return true;
    }
    bool gaps_decreasing() const {
        for (std::size_t k = 1; k < junction_gaps.size(); ++k)
            if (!(junction_gaps[k] < junction_gaps[k - 1])) return false;
        return true;
    }
};

/// Least-squares slope of log y against log x over the positive entries.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
        const double lx = std::log(x[k]), ly = std::log(y[k]);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
        ++n;
    }
    if (n < 2) return 0.0;
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

/// Solves the thermostatic system along a threshold family and compares with
/// the assembled limit field of that family.
inline ConvergenceStudy run_convergence(const Scenario& s, const ThresholdFamily& family,
                                        const std::vector<double>& epsilons, const SolveOptions& opt = {}) {
    for (std::size_t k = 1; k < epsilons.size(); ++k)
        if (!(epsilons[k] < epsilons[k - 1])) throw ConfigError("epsilons must be strictly decreasing");
    ConvergenceStudy st;
    st.family = family.name;
    st.epsilons = epsilons;
    st.grid_step = s.grid_step;
    st.rate_constant = junction_rate_constant(s);

    const std::vector<double> vsc = state_constraint_values(s, opt);
    const JunctionReport rep = family_limit(s, family, vsc);
    st.limit_value = rep.v_junction;
    st.limit_tag = rep.argmin;
    const ValueField limit = assemble_limit(s, rep, opt).field;

    std::vector<ValueField> fields(epsilons.size());
    parallel_for(epsilons.size(), [&](std::size_t k) { fields[k] = solve_thermostatic(s, family.at(s, epsilons[k]), opt); });

    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        const ValueField& f = fields[k];
        double err = 0.0;
        for (const auto& ls : limit.slices) {
            const FieldSlice& es = f.slice(ls.branch);
            for (std::size_t i = 0; i < ls.grid.size(); ++i) {
                const double y = ls.grid.node(i);
                if (y > es.grid.right) break;
                err = std::max(err, std::fabs(es.at(y) - ls.values[i]));
            }
        }
        st.sup_errors.push_back(err);
        std::vector<std::pair<int, double>> jv;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        double worst = 0.0;
        for (const auto& sl : f.slices) {
            const double v = sl.at(0.0);
            jv.emplace_back(sl.branch, v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            worst = std::max(worst, std::fabs(v - st.limit_value));
        }
        const double eps_max = *std::max_element(f.meta.thresholds.begin(), f.meta.thresholds.end());
        st.within_bound.push_back(worst <= st.rate_constant * eps_max + 5.0 * s.grid_step);
        st.junction_gaps.push_back(hi - lo);
        st.junction_values.push_back(std::move(jv));
    }
    st.empirical_order = loglog_slope(st.epsilons, st.sup_errors);
    return st;
}

struct DppSample {
    RelayState start;
    double solver = 0.0;
    double rollout = 0.0;
    double allowance = 0.0;  // scheme tolerance + truncation tails at this start
};

struct DppCheck {
    std::vector<DppSample> samples;
    double worst_gap = -std::numeric_limits<double>::infinity();  // max (solver - rollout - allowance)
    double worst_raw_gap = -std::numeric_limits<double>::infinity();  // max (solver - rollout)
    double scheme_tolerance = 0.0;
    double horizon_tail = 0.0;

    bool ok() const { return worst_gap <= 0.0; }
};

struct DppOptions {
    std::uint64_t seed = 20240517;
    double horizon = 0.0;  // 0: chosen so that the horizon tail is below 1e-6 of the cost scale
    double dt = 0.0;       // 0: the grid step
    RolloutOptions rollout;
};

/// Compares the solver's V_eps with brute-force rollouts from sampled grid
/// starts. A rollout is an admissible trajectory, so its cost may not fall
/// below the solver value by more than the scheme tolerance plus the
/// truncation tails.
inline DppCheck cross_check_dpp(const Scenario& s, const ThermostatConfig& cfg, std::size_t n_starts,
                                const DppOptions& opt = {}, const SolveOptions& sopt = {}) {
    const ValueField v = solve_thermostatic(s, cfg, sopt);
    const double max_eps = *std::max_element(cfg.thresholds.begin(), cfg.thresholds.end());
    const ValidationReport val = validate_scenario(s, max_eps);
    const double cap = val.sup_cost / s.lambda;
    const double m = std::max(val.sup_dynamics, 1e-12);
    const double horizon = opt.horizon > 0.0 ? opt.horizon : std::log(std::max(cap, 1.0) * 1e6) / s.lambda;
    const double dt = opt.dt > 0.0 ? opt.dt : s.grid_step;

    DppCheck out;
    out.horizon_tail = cap * std::exp(-s.lambda * horizon);
    const FieldShape sh = field_shape(v);
    out.scheme_tolerance = 5.0 * s.grid_step * std::max(1.0, sh.slope);

    std::mt19937_64 rng(opt.seed);
    std::vector<DppSample> samples(n_starts);
    for (auto& smp : samples) {
        const std::size_t b = std::uniform_int_distribution<std::size_t>(0, s.branches.size() - 1)(rng);
        const FieldSlice& sl = v.slices[b];
        const std::size_t last = sl.grid.nearest(0.5 * s.domain_radius);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, last)(rng);
        const double y = sl.grid.node(k);
        smp.start = {sl.branch, sl.orientation * y};
        smp.solver = sl.values[k];
        const double truncation = cap * std::exp(-s.lambda * (s.domain_radius - std::fabs(y)) / m);
        smp.allowance = out.scheme_tolerance + out.horizon_tail + truncation;
    }
    parallel_for(samples.size(), [&](std::size_t i) {
        samples[i].rollout = best_rollout(s, cfg, samples[i].start, horizon, dt, opt.rollout).cost;
    });
    for (const auto& smp : samples) {
        out.worst_raw_gap = std::max(out.worst_raw_gap, smp.solver - smp.rollout);
        out.worst_gap = std::max(out.worst_gap, smp.solver - smp.rollout - smp.allowance);
    }
    out.samples = std::move(samples);
    return out;
}

struct OrderStudy {
    std::vector<std::vector<int>> orders;
    std::vector<std::vector<std::pair<int, double>>> junction_values;
    double max_spread = 0.0;  // max over branches of the spread of V_eps(0, i) across orders
};

/// Solves the uniform threefold system under several switching orders.
inline OrderStudy order_independence(const Scenario& s, double eps, const std::vector<std::vector<int>>& orders,
                                     const SolveOptions& opt = {}) {
    OrderStudy st;
    st.orders = orders;
    std::vector<ValueField> fields(orders.size());
    parallel_for(orders.size(), [&](std::size_t k) {
        ThermostatConfig cfg = ThermostatConfig::uniform(s, eps);
        cfg.order = orders[k];
        fields[k] = solve_thermostatic(s, cfg, opt);
    });
    for (const auto& f : fields) {
        std::vector<std::pair<int, double>> jv;
        for (const auto& sl : f.slices) jv.emplace_back(sl.branch, sl.at(0.0));
        st.junction_values.push_back(std::move(jv));
    }
    for (std::size_t b = 0; b < s.branches.size(); ++b) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& jv : st.junction_values) {
            lo = std::min(lo, jv[b].second);
            hi = std::max(hi, jv[b].second);
        }
        st.max_spread = std::max(st.max_spread, hi - lo);
    }
    return st;
}

}  // namespace junctio
