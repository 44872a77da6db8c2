#pragma once

#include <string>
#include <vector>

#include "junctio/junctio.hpp"

namespace support {

inline junctio::Scenario scenario_file(const std::string& name) {
    return junctio::load_scenario(std::string(JUNCTIO_SCENARIO_DIR) + "/" + name + ".json");
}

inline junctio::BranchSpec branch(int id, const std::string& f, const std::string& l) {
    return {id, junctio::Expr::parse(f), junctio::Expr::parse(l)};
}

inline junctio::Scenario make(std::vector<junctio::BranchSpec> branches, std::vector<double> controls,
                              double lambda, double radius, double step) {
    junctio::Scenario s;
    s.branches = std::move(branches);
    s.controls = junctio::ControlSet(std::move(controls));
    s.lambda = lambda;
    s.domain_radius = radius;
    s.grid_step = step;
    s.check();
    return s;
}

/// Two branches with f = a, A = {-1, 0, 1} and constant costs.
inline junctio::Scenario twofold_constant(double l_minus, double l_plus, double step = 0.01, double radius = 8.0) {
    return make({branch(-1, "a", std::to_string(l_minus)), branch(1, "a", std::to_string(l_plus))}, {-1, 0, 1}, 1.0,
                radius, step);
}

/// Forced-cycle threefold scenario: cost c_i for a = -1 and big for a = +1.
inline junctio::Scenario threefold_forced(double c1, double c2, double c3, double big, double step = 0.005) {
    auto cost = [big](double c) {
        return std::to_string(c) + " + " + std::to_string((big - c) / 2.0) + " * (a + 1)";
    };
    return make({branch(1, "a", cost(c1)), branch(2, "a", cost(c2)), branch(3, "a", cost(c3))}, {-1, 1}, 1.0, 2.0,
                step);
}

}  // namespace support
