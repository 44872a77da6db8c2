#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <random>

#include "support.hpp"

using namespace junctio;
using Catch::Matchers::WithinAbs;

namespace {

Scenario analytic(double h) {
    Scenario s = support::scenario_file("analytic");
    s.grid_step = h;
    return s;
}

double sup_error(const FieldSlice& sl, double (*exact)(double)) {
    double err = 0.0;
    for (std::size_t k = 0; k < sl.grid.size(); ++k) err = std::max(err, std::fabs(sl.values[k] - exact(sl.grid.node(k))));
    return err;
}

double analytic_value(double x) { return x - 1.0 + std::exp(-x); }

}  // namespace

TEST_CASE("grids include both endpoints and align thresholds", "[hjb][grid]") {
    const Grid g = Grid::make(0.0, 5.0, 0.003);
    CHECK(g.node(0) == 0.0);
    CHECK(g.node(g.size() - 1) == 5.0);
    const Grid a = Grid::aligned(0.07, 2.0, 0.01);
    CHECK(a.left == -0.07);
    CHECK(a.right >= 2.0);
    bool has_zero = false, has_eps = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        has_zero |= std::fabs(a.node(k)) < 1e-12;
        has_eps |= std::fabs(a.node(k) - 0.07) < 1e-12;
    }
    CHECK(has_zero);
    CHECK(has_eps);
    CHECK(a.step() <= 0.01 + 1e-15);
    std::vector<double> v{0.0, 1.0, 4.0};
    const Grid t{0.0, 2.0, 2};
    CHECK(t.interpolate(v, 1.5) == 2.5);
    CHECK(t.interpolate(v, -1.0) == 0.0);
    CHECK(t.interpolate(v, 9.0) == 4.0);
}

TEST_CASE("Hamiltonian examples", "[hjb]") {
    const Scenario s = support::twofold_constant(3, 3);
    for (double p : {-2.0, -0.5, 0.0, 0.7, 4.0}) CHECK_THAT(hamiltonian(s, 1, 0.3, p), WithinAbs(std::fabs(p) - 3.0, 1e-15));
    const Scenario a = analytic(0.01);
    CHECK_THAT(hamiltonian(a, 1, 2.0, 0.0), WithinAbs(-2.0, 1e-15));
    // Symbolic oracle: V = x - 1 + e^{-x}, V' = 1 - e^{-x}, lambda V + |V'| - x = 0.
    for (double x : {0.1, 0.5, 1.0, 2.5, 4.9}) {
        const double v = analytic_value(x), dv = 1.0 - std::exp(-x);
        CHECK_THAT(a.lambda * v + hamiltonian(a, 1, x, dv), WithinAbs(0.0, 1e-14));
    }
    // The mirrored branch: local Hamiltonian in y equals the native one at slope -p.
    CHECK_THAT(local_hamiltonian(a, -1, 0.4, 0.3), WithinAbs(hamiltonian(a, -1, -0.4, -0.3), 1e-15));
}

TEST_CASE("Dirichlet problem examples", "[hjb]") {
    const Scenario s = support::twofold_constant(2, 2, 0.01, 6.0);
    const Grid g = Grid::make(0.0, s.domain_radius, s.grid_step);
    SECTION("staying is optimal when the exit is expensive") {
        for (double exit : {2.0, 2.5, 5.0}) {
            const auto f = solve_branch_dirichlet(s, 1, g, exit);
            for (double v : f.slices.front().values) CHECK_THAT(v, WithinAbs(2.0, 1e-9));
        }
    }
    SECTION("free exit: ride to the boundary") {
        const auto f = solve_branch_dirichlet(s, 1, g, 0.0);
        const auto& sl = f.slices.front();
        double err = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k)
            err = std::max(err, std::fabs(sl.values[k] - 2.0 * (1.0 - std::exp(-g.node(k)))));
        CHECK(err <= 5.0 * s.grid_step);
        CHECK(sl.values.front() == 0.0);
    }
}

TEST_CASE("state-constraint solution matches the analytic oracle", "[hjb]") {
    for (double h : {0.02, 0.01, 0.005}) {
        const Scenario s = analytic(h);
        const Grid g = Grid::make(0.0, s.domain_radius, h);
        const auto f = solve_state_constraint(s, 1, g);
        const double err = sup_error(f.slices.front(), analytic_value);
        INFO("h = " << h << " error = " << err);
        CHECK(err <= 5.0 * h);
        CHECK(f.slices.front().values.front() == 0.0);
    }
}

TEST_CASE("state constraint with costly outward motion", "[hjb]") {
    // A = {-1, 1}, l = 1 inward and M outward: V_sc(0) lies in [1, M] and is
    // no larger than the value of shuttling between the first two nodes.
    using support::branch;
    const double big = 9.0, h = 0.01;
    const Scenario s = support::make({branch(-1, "a", "1"), branch(1, "a", "1 + 4 * (a + 1)")}, {-1, 1}, 1.0, 4.0, h);
    const Grid g = Grid::make(0.0, s.domain_radius, h);
    const double v0 = solve_state_constraint(s, 1, g).slices.front().values.front();
    CHECK(v0 >= 1.0);
    CHECK(v0 <= big);
    const double d = std::exp(-h);
    const double shuttle = (big * (1 - d) + d * 1.0 * (1 - d)) / (1 - d * d);
    CHECK(v0 <= shuttle + 1e-9);
    CHECK_THAT(v0, WithinAbs((1.0 + big) / 2.0, 0.05));
}

TEST_CASE("thermostatic solve examples", "[hjb]") {
    SECTION("symmetric constant costs") {
        const Scenario s = support::twofold_constant(3, 3, 0.01, 5.0);
        for (double eps : {0.2, 0.05}) {
            const auto f = solve_thermostatic(s, ThermostatConfig::twofold(eps));
            for (const auto& sl : f.slices)
                for (double v : sl.values) CHECK_THAT(v, WithinAbs(3.0, 1e-8));
        }
    }
    SECTION("twofold example") {
        const Scenario s = support::twofold_constant(1, 2, 0.01, 8.0);
        const double eps = 0.1;
        const auto cfg = ThermostatConfig::twofold(eps);
        const auto f = solve_thermostatic(s, cfg);
        const double v0 = f.at(1, 0.0);
        CHECK(v0 >= 1.0 - 1e-9);
        CHECK(v0 <= 1.0 + 2.0 * eps);
        const auto& minus = f.slice(-1);
        for (std::size_t k = 0; k < minus.grid.size(); ++k)
            if (minus.grid.node(k) >= 0.0) CHECK_THAT(minus.values[k], WithinAbs(1.0, 1e-9));
        // Rollout oracle: the solver value cannot exceed an admissible cost.
        const auto r = best_rollout(s, cfg, {1, 0.0}, 30.0, 0.01);
        CHECK(v0 <= r.cost + 5.0 * s.grid_step);
    }
    SECTION("forced threefold cycle approaches (100 + 1 + 1) / 3") {
        const Scenario s = support::threefold_forced(100, 1, 1, 1000, 0.005);
        const double c = junction_rate_constant(s);
        for (double eps : {0.1, 0.05}) {
            const auto f = solve_thermostatic(s, ThermostatConfig::uniform(s, eps));
            for (const auto& sl : f.slices) CHECK(std::fabs(sl.at(0.0) - 34.0) <= c * eps + 5.0 * s.grid_step);
        }
    }
}

TEST_CASE("the semi-Lagrangian operator is monotone", "[hjb][property]") {
    const Scenario s = support::scenario_file("cycle");
    const Grid g = Grid::aligned(0.1, 3.0, 0.05);
    const double cap = value_cap(s, 0.1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, cap);
    std::uniform_real_distribution<double> bump(0.0, 1.0);
    for (int id : {-1, 1}) {
        const BranchOperator op(s, id, g, LeftBoundary::exit_cost, cap);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> lo(g.size()), hi(g.size()), tlo, thi;
            for (std::size_t k = 0; k < g.size(); ++k) {
                lo[k] = u(rng);
                hi[k] = lo[k] + (bump(rng) < 0.3 ? bump(rng) : 0.0);
            }
            const double exit_lo = u(rng), exit_hi = exit_lo + bump(rng);
            op.apply(lo, tlo, exit_lo);
            op.apply(hi, thi, exit_hi);
            for (std::size_t k = 0; k < g.size(); ++k) CHECK(thi[k] >= tlo[k]);
        }
    }
}

TEST_CASE("converged fields are bounded, stationary and contract geometrically", "[hjb][property]") {
    const Scenario s = support::scenario_file("cycle");
    Scenario coarse = s;
    coarse.grid_step = 0.01;
    for (double eps : {0.2, 0.1, 0.05}) {
        const auto cfg = ThermostatConfig::twofold(eps);
        SolveOptions opt;
        opt.tol = 1e-10;
        const auto f = solve_thermostatic(coarse, cfg, opt);
        const double cap = value_cap(coarse, eps);
        for (const auto& sl : f.slices)
            for (double v : sl.values) {
                CHECK(v >= 0.0);
                CHECK(v <= cap + 1e-12);
            }
        CHECK(f.meta.converged);
        CHECK(f.meta.residual < opt.tol);
        const auto& hist = f.meta.residual_history;
        REQUIRE(hist.size() >= 3);
        for (std::size_t k = 2; k < hist.size(); ++k)
            if (hist[k - 1] > 1e-8) CHECK(hist[k] / hist[k - 1] < 1.0);

        // One more sweep of every branch changes nothing beyond the tolerance.
        for (const auto& sl : f.slices) {
            const int nxt = cfg.next(sl.branch);
            const double exit = f.slice(nxt).at(cfg.threshold(coarse, nxt));
            const BranchOperator op(coarse, sl.branch, sl.grid, LeftBoundary::exit_cost, cap);
            std::vector<double> v = sl.values;
            CHECK(op.sweep(v, exit, true) < opt.tol);
        }
    }
}

TEST_CASE("results do not depend on the thread count", "[hjb][property]") {
    const Scenario s = support::threefold_forced(100, 1, 1, 1000, 0.01);
    const auto cfg = ThermostatConfig::uniform(s, 0.05);
    ::setenv("JUNCTIO_THREADS", "1", 1);
    const auto a = solve_thermostatic(s, cfg);
    ::setenv("JUNCTIO_THREADS", "3", 1);
    const auto b = solve_thermostatic(s, cfg);
    ::unsetenv("JUNCTIO_THREADS");
    for (std::size_t k = 0; k < a.slices.size(); ++k) CHECK(a.slices[k].values == b.slices[k].values);
    CHECK(a.meta.residual_history == b.meta.residual_history);
}

TEST_CASE("non-convergence is reported with the residual history", "[hjb]") {
    const Scenario s = support::scenario_file("cycle");
    SolveOptions opt;
    opt.max_sweeps = 1;
    try {
        solve_thermostatic(s, ThermostatConfig::twofold(0.1), opt);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(std::string(e.what()).find("did not converge") != std::string::npos);
    }
    opt.max_sweeps = 0;
    opt.max_outer = 2;
    try {
        solve_thermostatic(s, ThermostatConfig::twofold(0.1), opt);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(e.history().size() == 2);
    }
    const Grid g = Grid::make(0.0, s.domain_radius, s.grid_step);
    opt.max_sweeps = 1;
    CHECK_THROWS_AS(solve_state_constraint(s, 1, g, opt), ConvergenceError);
}

TEST_CASE("field metadata records the run", "[hjb]") {
    const Scenario s = support::scenario_file("twofold");
    const auto f = solve_thermostatic(s, ThermostatConfig::twofold(0.1));
    CHECK(f.meta.kind == "thermostatic");
    CHECK(f.meta.scenario_hash == scenario_hash(s));
    CHECK(f.meta.thresholds == std::vector<double>{0.1, 0.1});
    CHECK(f.meta.iterations > 0);
    CHECK(f.meta.tail_bound <= 2.0 * std::exp(-s.domain_radius) + 1e-15);
}
