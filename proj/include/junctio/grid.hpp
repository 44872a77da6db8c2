#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace junctio {

/// Uniform grid on [left, right]; both endpoints are nodes.
struct Grid {
    double left = 0.0;
    double right = 1.0;
    std::size_t intervals = 1;

    static Grid make(double left, double right, double h) {
        if (!(right > left) || !(h > 0.0)) throw std::invalid_argument("grid needs left < right and h > 0");
        const auto n = std::max<long long>(1, std::llround((right - left) / h));
        return {left, right, static_cast<std::size_t>(n)};
    }

    /// Grid starting at -eps whose step divides eps, so that -eps, 0 and +eps
    /// are all nodes. The right end is the first node at or beyond `reach`.
    static Grid aligned(double eps, double reach, double h) {
        if (!(eps > 0.0) || !(h > 0.0) || !(reach > 0.0))
            throw std::invalid_argument("aligned grid needs positive eps, reach and h");
        const double per_eps = std::ceil(eps / h - 1e-9);
        const double step = eps / per_eps;
        const auto n = static_cast<std::size_t>(std::ceil((reach + eps) / step - 1e-9));
        double right = -eps + static_cast<double>(n) * step;
        if (right < reach && reach - right <= 1e-9 * step) right = reach;
        return {-eps, right, n};
    }

    double step() const { return (right - left) / static_cast<double>(intervals); }
    std::size_t size() const { return intervals + 1; }

    double node(std::size_t k) const {
        if (k == intervals) return right;
        return left + static_cast<double>(k) * step();
    }

    /// Nearest node index to x (clamped).
    std::size_t nearest(double x) const {
        const double r = std::round((x - left) / step());
        return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(intervals)));
    }

    bool contains(double x, double slack = 1e-12) const { return x >= left - slack && x <= right + slack; }

    /// Linear interpolation of node values; x is clamped into the grid.
    double interpolate(const std::vector<double>& v, double x) const {
        const double s = (std::clamp(x, left, right) - left) / step();
        auto k = static_cast<std::size_t>(std::floor(s));
        if (k >= intervals) return v[intervals];
        const double t = s - static_cast<double>(k);
        if (t < 1e-12) return v[k];
        if (t > 1.0 - 1e-12) return v[k + 1];
        return (1.0 - t) * v[k] + t * v[k + 1];
    }
};

}  // namespace junctio
