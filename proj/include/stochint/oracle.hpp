#pragma once

#include "stochint/rng.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

namespace stochint {

struct OraclePairValue {
    int i1;
    int i2;
    double double_integral; // sum_l (w_{tau_l}^{(i1)} - w_t^{(i1)}) dw_l^{(i2)}
    double area;            // (I^{(i1 i2)} - I^{(i2 i1)}) / 2
};

struct OracleResult {
    int cells = 0;
    Eigen::VectorXd increments; // I^{(i)} = w_T^{(i)} - w_t^{(i)}, index i-1
    std::vector<OraclePairValue> pairs;

    double increment(int i) const { return increments(i - 1); }
};

namespace detail {

/// Left-point sums for both orderings of one pair in a single pass.
inline std::pair<double, double> left_point_pair(const BrownianGridPath& path, int i1, int i2) {
    const auto a = path.increments.row(i1 - 1);
    const auto b = path.increments.row(i2 - 1);
    double wa = 0.0, wb = 0.0, ab = 0.0, ba = 0.0;
    for (Eigen::Index l = 0; l < a.size(); ++l) {
        ab += wa * b(l);
        ba += wb * a(l);
        wa += a(l);
        wb += b(l);
    }
    return {ab, ba};
}

inline void check_oracle_pair(const BrownianGridPath& path, int i1, int i2) {
    if (i1 < 1 || i2 < 1 || i1 > path.components() || i2 > path.components())
        throw std::invalid_argument("oracle: component outside the path");
}

} // namespace detail

inline OracleResult oracle_integrals(const BrownianGridPath& path, const std::vector<std::pair<int, int>>& pairs) {
    if (path.grid.cells() < 2) throw std::invalid_argument("oracle: need at least two grid cells");
    OracleResult r;
    r.cells = path.grid.cells();
    r.increments = path.increments.rowwise().sum();
    r.pairs.reserve(pairs.size());
    for (const auto& [i1, i2] : pairs) {
        detail::check_oracle_pair(path, i1, i2);
        const auto [ab, ba] = detail::left_point_pair(path, i1, i2);
        r.pairs.push_back({i1, i2, ab, 0.5 * (ab - ba)});
    }
    return r;
}

inline double oracle_area(const BrownianGridPath& path, int i1, int i2) {
    detail::check_oracle_pair(path, i1, i2);
    const auto [ab, ba] = detail::left_point_pair(path, i1, i2);
    return 0.5 * (ab - ba);
}

inline double oracle_double_integral(const BrownianGridPath& path, int i1, int i2) {
    detail::check_oracle_pair(path, i1, i2);
    return detail::left_point_pair(path, i1, i2).first;
}

} // namespace stochint
