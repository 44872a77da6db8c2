#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace junctio;
using Catch::Matchers::WithinAbs;

TEST_CASE("expressions evaluate the documented examples", "[model][expr]") {
    CHECK(Expr::parse("a")(3.0, -2.5) == -2.5);
    CHECK(Expr::parse("2 + abs(x) * a")(-3.0, 2.0) == 8.0);
    CHECK_THROWS_AS(Expr::parse("min(x, a) / 0")(1.0, 2.0), EvalError);
    CHECK_THROWS_AS(Expr::parse("min(x, a) / 0")(-7.0, 0.5), EvalError);
    CHECK(Expr::parse("max(x, a) - min(x, a)")(1.0, 4.0) == 3.0);
    CHECK_THAT(Expr::parse("exp(-x) * 2")(1.0, 0.0), WithinAbs(2.0 * std::exp(-1.0), 1e-15));
    CHECK(Expr::parse("-a*-x")(2.0, 3.0) == 6.0);
    CHECK(Expr::parse("1.5e2 + 2E-1")(0, 0) == 150.2);
    CHECK(Expr::parse("8 / 2 / 2")(0, 0) == 2.0);
    CHECK(Expr::parse("2 - 3 - 4")(0, 0) == -5.0);
}

TEST_CASE("parse errors carry byte offsets", "[model][expr]") {
    try {
        Expr::parse("1 + foo(x)");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
        CHECK(std::string(e.what()).find("foo") != std::string::npos);
    }
    try {
        Expr::parse("(x + 1");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 6);
    }
    CHECK_THROWS_AS(Expr::parse(""), ParseError);
    CHECK_THROWS_AS(Expr::parse("x y"), ParseError);
    CHECK_THROWS_AS(Expr::parse("abs(x, a)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("min(x)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("1..2"), ParseError);
    CHECK_THROWS_AS(Expr::parse(std::string(200, '(') + "x" + std::string(200, ')')), ParseError);
}

namespace {

std::string random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 9 : 2);
    switch (pick(rng)) {
    case 0: return "x";
    case 1: return "a";
    case 2: return std::to_string(std::uniform_int_distribution<int>(0, 40)(rng) / 8.0);
    case 3: return "(" + random_expr(rng, depth - 1) + " + " + random_expr(rng, depth - 1) + ")";
    case 4: return "(" + random_expr(rng, depth - 1) + " - " + random_expr(rng, depth - 1) + ")";
    case 5: return random_expr(rng, depth - 1) + " * " + random_expr(rng, depth - 1);
    case 6: return "-" + random_expr(rng, depth - 1);
    case 7: return "abs(" + random_expr(rng, depth - 1) + ")";
    case 8: return "min(" + random_expr(rng, depth - 1) + ", " + random_expr(rng, depth - 1) + ")";
    default: return "max(" + random_expr(rng, depth - 1) + ", exp(" + random_expr(rng, 0) + "))";
    }
}

}  // namespace

TEST_CASE("parse, print, parse reproduces the tree and finite values", "[model][expr][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 500; ++k) {
        const std::string src = random_expr(rng, 4);
        const Expr e = Expr::parse(src);
        const Expr back = Expr::parse(e.str());
        INFO(src << "  ->  " << e.str());
        CHECK(e.same_tree(back));
        CHECK(back.str() == e.str());
        for (int j = 0; j < 5; ++j) {
            const double x = u(rng), a = u(rng);
            const double v = e(x, a);
            CHECK(std::isfinite(v));
            CHECK(v == back(x, a));
        }
    }
}

TEST_CASE("control sets are sorted and deduplicated", "[model]") {
    ControlSet c({1.0, -1.0, 0.0, 1.0, -1.0});
    CHECK(c.values() == std::vector<double>{-1.0, 0.0, 1.0});
    CHECK_THROWS_AS(ControlSet(std::vector<double>{}), ConfigError);
    CHECK_THROWS_AS(ControlSet({std::nan("")}), ConfigError);
}

TEST_CASE("scenario structure is checked", "[model]") {
    using support::branch;
    CHECK_THROWS_AS(support::make({branch(1, "a", "1")}, {-1, 1}, 1, 5, 0.1), ConfigError);
    CHECK_THROWS_AS(support::make({branch(1, "a", "1"), branch(2, "a", "1")}, {-1, 1}, 1, 5, 0.1), ConfigError);
    CHECK_THROWS_AS(support::make({branch(-1, "a", "1"), branch(1, "a", "1")}, {-1, 1}, 0, 5, 0.1), ConfigError);
    CHECK_THROWS_AS(support::make({branch(-1, "a", "1"), branch(1, "a", "1")}, {-1, 1}, 1, 5, 6), ConfigError);
    const Scenario s = support::make({branch(-1, "a", "1"), branch(1, "a", "1")}, {-1, 1}, 1, 5, 0.1);
    CHECK(s.topology() == Topology::twofold);
    CHECK(s.orientation(-1) == -1.0);
    CHECK(s.local_dynamics(-1, 0.5, 1.0) == -1.0);  // moving right on the negative axis approaches the junction
}

TEST_CASE("thermostat configurations are checked", "[model]") {
    const Scenario s = support::threefold_forced(1, 1, 1, 10);
    ThermostatConfig c = ThermostatConfig::uniform(s, 0.1);
    CHECK(c.order == std::vector<int>{1, 2, 3});
    CHECK(c.next(3) == 1);
    c.check(s);
    c.order = {1, 2, 2};
    CHECK_THROWS_AS(c.check(s), ConfigError);
    c = ThermostatConfig::uniform(s, 0.0);
    CHECK_THROWS_AS(c.check(s), ConfigError);
    c = ThermostatConfig::uniform(s, 5.0);
    CHECK_THROWS_AS(c.check(s), ConfigError);
}

TEST_CASE("validation reports controllability, signs and bounds", "[model]") {
    using support::branch;
    {
        const Scenario s = support::make({branch(-1, "a", "1"), branch(1, "a", "1")}, {-1, 0, 1}, 1, 5, 0.1);
        const auto r = validate_scenario(s);
        for (const auto& b : r.branches) CHECK(b.controllable);
        CHECK(r.ok);
        CHECK(r.sup_dynamics == 1.0);
    }
    {
        const Scenario s = support::make({branch(-1, "a*a", "1"), branch(1, "a*a", "1")}, {-1, 0, 1}, 1, 5, 0.1);
        const auto r = validate_scenario(s);
        for (const auto& b : r.branches) CHECK_FALSE(b.controllable);
        CHECK_FALSE(r.ok);
    }
    {
        // l = x sampled on [-0.1, 5]: negative at x < 0.
        const Scenario s = support::make({branch(1, "a", "x"), branch(2, "a", "1"), branch(3, "a", "1")}, {-1, 0, 1},
                                         1, 5, 0.01);
        const auto r = validate_scenario(s, 0.1);
        CHECK_FALSE(r.branches[0].cost_nonnegative);
        CHECK(r.branches[0].min_cost_x < 0.0);
        CHECK_THAT(r.branches[0].min_cost, WithinAbs(-0.1, 1e-12));
        CHECK(r.branches[1].cost_nonnegative);
        CHECK_FALSE(r.ok);
    }
    {
        const Scenario s = support::make({branch(-1, "1 / x", "1"), branch(1, "a", "1")}, {-1, 1}, 1, 5, 0.1);
        CHECK_THROWS_AS(validate_scenario(s), EvalError);
    }
}

TEST_CASE("validation is deterministic", "[model][property]") {
    const Scenario s = support::scenario_file("threefold");
    const auto a = validate_scenario(s), b = validate_scenario(s);
    REQUIRE(a.branches.size() == b.branches.size());
    for (std::size_t k = 0; k < a.branches.size(); ++k) {
        CHECK(a.branches[k].lipschitz == b.branches[k].lipschitz);
        CHECK(a.branches[k].min_cost == b.branches[k].min_cost);
        CHECK(a.branches[k].sup_cost == b.branches[k].sup_cost);
    }
    CHECK(a.messages == b.messages);
}

TEST_CASE("Lipschitz estimates on nested grids are monotone and bounded", "[model][property]") {
    using support::branch;
    // True Lipschitz constants 2 and 1, attained at the junction.
    Scenario s = support::make({branch(-1, "a + 2*x/(1 + x*x)", "1"), branch(1, "a + x / (1 + abs(x))", "1")},
                               {-1, 1}, 1, 4, 0.4);
    double prev_m = 0.0, prev_p = 0.0;
    for (double h : {0.4, 0.2, 0.1, 0.05, 0.025}) {
        s.grid_step = h;
        const auto r = validate_scenario(s);
        const double lm = r.branches[0].lipschitz, lp = r.branches[1].lipschitz;
        // Refining a nested grid can only reveal steeper difference quotients.
        CHECK(lm >= prev_m - 1e-12);
        CHECK(lp >= prev_p - 1e-12);
        CHECK(lm <= 2.0 + 1e-9);
        CHECK(lp <= 1.0 + 1e-9);
        prev_m = lm, prev_p = lp;
    }
    CHECK(prev_m > 1.8);
    CHECK(prev_p > 0.95);
}

TEST_CASE("scenario hash follows the canonical form", "[model]") {
    const Scenario a = support::scenario_file("twofold");
    Scenario b = a;
    CHECK(scenario_hash(a) == scenario_hash(b));
    b.lambda = 2.0;
    CHECK(scenario_hash(a) != scenario_hash(b));
}
