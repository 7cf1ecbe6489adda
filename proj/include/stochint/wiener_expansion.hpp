#pragma once

#include "stochint/basis.hpp"
#include "stochint/levy_area.hpp"
#include "stochint/quadrature.hpp"
#include "stochint/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace stochint {

/// sum_{j<=m} (integral_t^s phi_j) zeta_j^{(i)}: the truncated expansion of w_s - w_t.
inline double truncated_increment_eval(const GaussianPanel& panel, const BasisSystem& basis, int m, int i, double s) {
    if (m < 0) throw std::invalid_argument("truncation order must be non-negative");
    if (i < 1 || i > panel.components()) throw std::invalid_argument("component outside the panel");
    if (panel.max_index() < m) throw std::invalid_argument("panel does not cover the truncation order");
    double v = 0.0;
    for (int j = 0; j <= m; ++j) v += antiderivative_phi(basis, j, s) * panel(i, j);
    return v;
}

/// (s - t) - sum_{j<=m} (integral_t^s phi_j)^2: the pointwise variance of the truncation error.
inline double increment_variance_deficit(const BasisSystem& basis, int m, double s) {
    double partial = 0.0;
    for (int j = 0; j <= m; ++j) {
        const double a = antiderivative_phi(basis, j, s);
        partial += a * a;
    }
    return (s - basis.interval.start()) - partial;
}

/// integral over [t, T] of the pointwise variance deficit, by composite Gauss quadrature.
inline double increment_expansion_l2_error(const BasisSystem& basis, int m) {
    if (m < 0) throw std::invalid_argument("truncation order must be non-negative");
    const double width = basis.interval.length() / std::max(64, m);
    return integrate([&](double s) { return increment_variance_deficit(basis, m, s); }, basis.interval.start(),
                     basis.interval.end(), width);
}

/// integral_t^s phi_j as a finite combination sum_l c_l phi_l(s).
/// The trigonometric j = 0 case has infinitely many sine terms and is handled by the caller.
inline std::vector<std::pair<int, double>> antiderivative_expansion(const BasisSystem& basis, int j) {
    const double len = basis.interval.length();
    if (basis.kind == BasisKind::Legendre) {
        if (j == 0) return {{0, 0.5 * len}, {1, 0.5 * len / std::sqrt(3.0)}};
        return {{j + 1, 0.5 * len / std::sqrt((2.0 * j + 1.0) * (2.0 * j + 3.0))}, {j - 1, -0.5 * len / std::sqrt(4.0 * j * j - 1.0)}};
    }
    if (j == 0) throw std::invalid_argument("the trigonometric antiderivative of phi_0 has no finite expansion");
    const int r = (j + 1) / 2;
    const double c = len / (2.0 * std::numbers::pi * r);
    if (j % 2 == 0) return {{2 * r - 1, c}};
    return {{0, std::sqrt(2.0) * c}, {2 * r, -c}};
}

/// I^{(i1 i2)} through the truncated increment: integral of
/// sum_{j<=m} zeta_j^{(i1)} integral_t^s phi_j  against dw^{(i2)}_s.
///
/// Legendre uses j <= m and needs panel index m + 1. Trigonometric uses j <= 2m; the
/// sine series of the linear part of integral phi_0 is summed to r = m and its
/// remainder enters through the tail variate (omitted when none is given).
inline double increment_area_series(const GaussianPanel& panel, const BasisSystem& basis, int m, int i1, int i2,
                                    const TailVariate* tail = nullptr) {
    if (m < 0) throw std::invalid_argument("truncation order must be non-negative");
    const bool legendre = basis.kind == BasisKind::Legendre;
    detail::check_pair(panel, i1, i2, legendre ? m + 1 : 2 * m);
    const double len = basis.interval.length();
    const int top = legendre ? m : 2 * m;
    double v = 0.0;
    for (int j = 0; j <= top; ++j) {
        double projected = 0.0;
        if (!legendre && j == 0) {
            // integral_t^s phi_0 = (s - t)/sqrt(L) = L/2 phi_0 - sum_r L/(pi r sqrt 2) phi_{2r-1}
            projected = 0.5 * len * panel(i2, 0);
            double sines = 0.0;
            for (int r = m; r >= 1; --r) sines += panel(i2, 2 * r - 1) / r;
            if (tail != nullptr) sines += std::sqrt(inverse_square_tail(m)) * (*tail)(i2);
            projected -= len / (std::numbers::pi * std::sqrt(2.0)) * sines;
        } else {
            for (const auto& [l, c] : antiderivative_expansion(basis, j)) projected += c * panel(i2, l);
        }
        v += panel(i1, j) * projected;
    }
    return v;
}

/// Brownian-bridge coefficients on [0, Delta] for components 1..m (row i-1).
/// Column r of `a` and `b` holds a_{i,r}, b_{i,r}; column 0 of `b` is unused.
struct BridgeCoefficients {
    double delta = 0.0;
    int R = 0;
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::VectorXd w_delta;

    int components() const { return static_cast<int>(a.rows()); }
};

/// a_{i,r}, b_{i,r} ~ N(0, Delta/(2 pi^2 r^2)), w_Delta ~ N(0, Delta), all independent;
/// a_{i,0} = -2 sum_r a_{i,r} so the truncated bridge vanishes at both ends.
/// Draw order per component: w_Delta, then (a_r, b_r) for r = 1..R.
inline BridgeCoefficients sample_bridge(RandomStream& stream, double delta, int R, int m) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("bridge length must be positive");
    if (R < 1) throw std::invalid_argument("bridge truncation must be >= 1");
    if (m < 1) throw std::invalid_argument("need at least one component");
    BridgeCoefficients c{delta, R, Eigen::MatrixXd::Zero(m, R + 1), Eigen::MatrixXd::Zero(m, R + 1), Eigen::VectorXd(m)};
    for (int i = 0; i < m; ++i) {
        c.w_delta(i) = std::sqrt(delta) * stream.normal();
        double sum = 0.0;
        for (int r = 1; r <= R; ++r) {
            const double sd = std::sqrt(delta / 2.0) / (std::numbers::pi * r);
            c.a(i, r) = sd * stream.normal();
            c.b(i, r) = sd * stream.normal();
            sum += c.a(i, r);
        }
        c.a(i, 0) = -2.0 * sum;
    }
    return c;
}

inline BridgeCoefficients sample_bridge(std::uint64_t seed, double delta, int R, int m) {
    RandomStream stream(seed);
    return sample_bridge(stream, delta, R, m);
}

/// w_t^{(i)} = (t/Delta) w_Delta + a_0/2 + sum_r (a_r cos(2 pi r t/Delta) + b_r sin(2 pi r t/Delta)).
inline double bridge_eval(const BridgeCoefficients& c, int i, double t) {
    if (i < 1 || i > c.components()) throw std::invalid_argument("component outside the bridge");
    if (!(t >= 0.0 && t <= c.delta)) throw std::domain_error("bridge evaluation outside [0, Delta]");
    const double w = 2.0 * std::numbers::pi * t / c.delta;
    double v = t / c.delta * c.w_delta(i - 1) + 0.5 * c.a(i - 1, 0);
    for (int r = 1; r <= c.R; ++r) v += c.a(i - 1, r) * std::cos(w * r) + c.b(i - 1, r) * std::sin(w * r);
    return v;
}

/// Bridge coefficients of the piecewise-linear interpolant of a grid path, by exact
/// cell integrals. The path interval is shifted to start at 0.
inline BridgeCoefficients bridge_from_path(const BrownianGridPath& path, int R) {
    if (R < 1) throw std::invalid_argument("bridge truncation must be >= 1");
    const TimeGrid& grid = path.grid;
    const double t0 = grid.point(0);
    const double delta = grid.interval().length();
    const int m = path.components();
    BridgeCoefficients c{delta, R, Eigen::MatrixXd::Zero(m, R + 1), Eigen::MatrixXd::Zero(m, R + 1), Eigen::VectorXd(m)};
    for (int i = 0; i < m; ++i) {
        const double wd = path.increments.row(i).sum();
        c.w_delta(i) = wd;
        double w_left = 0.0;
        for (int l = 0; l < grid.cells(); ++l) {
            const double s0 = grid.point(l) - t0;
            const double s1 = grid.point(l + 1) - t0;
            const double w_right = w_left + path.increments(i, l);
            // bridge value is linear on the cell: alpha + beta s
            const double beta = (w_right - w_left) / (s1 - s0) - wd / delta;
            const double alpha = (w_left - wd * s0 / delta) - beta * s0;
            c.a(i, 0) += 2.0 / delta * (alpha * (s1 - s0) + 0.5 * beta * (s1 * s1 - s0 * s0));
            for (int r = 1; r <= R; ++r) {
                const double om = 2.0 * std::numbers::pi * r / delta;
                // antiderivatives of (alpha + beta s) cos(om s) and (alpha + beta s) sin(om s)
                auto fc = [&](double s) { return (alpha + beta * s) * std::sin(om * s) / om + beta * std::cos(om * s) / (om * om); };
                auto fs = [&](double s) { return -(alpha + beta * s) * std::cos(om * s) / om + beta * std::sin(om * s) / (om * om); };
                c.a(i, r) += 2.0 / delta * (fc(s1) - fc(s0));
                c.b(i, r) += 2.0 / delta * (fs(s1) - fs(s0));
            }
            w_left = w_right;
        }
    }
    return c;
}

} // namespace stochint
