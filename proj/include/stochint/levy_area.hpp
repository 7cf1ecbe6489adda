#pragma once

#include "stochint/basis.hpp"
#include "stochint/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace stochint {

/// sum_{r=1}^{q} 1/r^2, summed from the small terms up.
inline double inverse_square_sum(int q) {
    if (q < 0) throw std::invalid_argument("truncation order must be non-negative");
    double s = 0.0;
    for (int r = q; r >= 1; --r) s += 1.0 / (static_cast<double>(r) * r);
    return s;
}

/// pi^2/6 - sum_{r<=q} 1/r^2.
inline double inverse_square_tail(int q) { return std::numbers::pi * std::numbers::pi / 6.0 - inverse_square_sum(q); }

/// sum_{i=1}^{q} 1/(4 i^2 - 1); telescopes to q/(2q+1).
inline double legendre_pair_sum(int q) {
    if (q < 0) throw std::invalid_argument("truncation order must be non-negative");
    double s = 0.0;
    for (int i = q; i >= 1; --i) s += 1.0 / (4.0 * i * i - 1.0);
    return s;
}

struct LevyAreaApprox {
    BasisKind kind;
    int q;
    double value;
    int i1;
    int i2;
    bool tail = false;
};

/// Aggregated tail Gaussian xi_q^{(i)} per component (index i-1).
struct TailVariate {
    Eigen::VectorXd xi;

    double operator()(int i) const { return xi(i - 1); }
};

/// Fresh N(0,1) per component.
inline TailVariate sample_tail(RandomStream& stream, int m) {
    TailVariate t{Eigen::VectorXd(m)};
    for (int i = 0; i < m; ++i) t.xi(i) = stream.normal();
    return t;
}

/// xi_q from the panel's own sine modes q < r <= r_max, normalized by the full tail:
/// (pi^2/6 - H_q)^{-1/2} sum_{r=q+1}^{r_max} zeta_{2r-1} / r.
inline TailVariate coupled_tail(const GaussianPanel& panel, int q, int r_max) {
    if (q < 0) throw std::invalid_argument("truncation order must be non-negative");
    if (r_max > q && panel.max_index() < 2 * r_max - 1)
        throw std::invalid_argument("panel does not cover the coupled tail up to r=" + std::to_string(r_max));
    TailVariate t{Eigen::VectorXd::Zero(panel.components())};
    const double scale = 1.0 / std::sqrt(inverse_square_tail(q));
    for (int i = 0; i < panel.components(); ++i) {
        double s = 0.0;
        for (int r = r_max; r > q; --r) s += panel.values(i, 2 * r - 1) / r;
        t.xi(i) = scale * s;
    }
    return t;
}

namespace detail {

inline void check_pair(const GaussianPanel& panel, int i1, int i2, int needed_index) {
    if (i1 == i2) throw std::invalid_argument("the area needs two distinct components");
    if (i1 < 1 || i2 < 1 || i1 > panel.components() || i2 > panel.components())
        throw std::invalid_argument("component outside the panel");
    if (panel.max_index() < needed_index)
        throw std::invalid_argument("panel does not cover basis index " + std::to_string(needed_index));
}

} // namespace detail

/// L/2 sum_{i=1}^{q} (zeta_{i-1}^{(i1)} zeta_i^{(i2)} - zeta_i^{(i1)} zeta_{i-1}^{(i2)}) / sqrt(4 i^2 - 1).
inline LevyAreaApprox levy_area_legendre(const GaussianPanel& panel, int q, int i1, int i2, const Interval& iv) {
    if (q < 0) throw std::invalid_argument("truncation order must be non-negative");
    detail::check_pair(panel, i1, i2, q);
    const auto a = panel.values.row(i1 - 1);
    const auto b = panel.values.row(i2 - 1);
    double s = 0.0;
    for (int i = 1; i <= q; ++i) s += (a(i - 1) * b(i) - a(i) * b(i - 1)) / std::sqrt(4.0 * i * i - 1.0);
    return {BasisKind::Legendre, q, 0.5 * iv.length() * s, i1, i2, false};
}

/// L/(2 pi) sum_{r=1}^{q} (1/r) (zeta_{2r} zeta'_{2r-1} - zeta_{2r-1} zeta'_{2r}
///   + sqrt(2) (zeta_{2r-1} zeta'_0 - zeta_0 zeta'_{2r-1})),
/// plus, with a tail variate, L/(2 pi) sqrt(2) (pi^2/6 - H_q)^{1/2} (xi zeta'_0 - zeta_0 xi').
inline LevyAreaApprox levy_area_trig(const GaussianPanel& panel, const TailVariate* tail, int q, int i1, int i2, const Interval& iv) {
    if (q < 0) throw std::invalid_argument("truncation order must be non-negative");
    detail::check_pair(panel, i1, i2, 2 * q);
    const auto a = panel.values.row(i1 - 1);
    const auto b = panel.values.row(i2 - 1);
    const double root2 = std::sqrt(2.0);
    double s = 0.0;
    for (int r = 1; r <= q; ++r) {
        const double term = a(2 * r) * b(2 * r - 1) - a(2 * r - 1) * b(2 * r) + root2 * (a(2 * r - 1) * b(0) - a(0) * b(2 * r - 1));
        s += term / r;
    }
    if (tail != nullptr) {
        if (tail->xi.size() < std::max(i1, i2)) throw std::invalid_argument("tail variate does not cover the components");
        s += root2 * std::sqrt(inverse_square_tail(q)) * ((*tail)(i1)*b(0) - a(0) * (*tail)(i2));
    }
    return {BasisKind::Trigonometric, q, iv.length() / (2.0 * std::numbers::pi) * s, i1, i2, tail != nullptr};
}

inline LevyAreaApprox levy_area(BasisKind kind, const GaussianPanel& panel, int q, int i1, int i2, const Interval& iv,
                                const TailVariate* tail = nullptr) {
    if (kind == BasisKind::Legendre) {
        if (tail != nullptr) throw std::invalid_argument("the tail correction applies to the trigonometric area only");
        return levy_area_legendre(panel, q, i1, i2, iv);
    }
    return levy_area_trig(panel, tail, q, i1, i2, iv);
}

/// I^{(i1 i2)q} = L/2 zeta_0^{(i1)} zeta_0^{(i2)} + area.
inline double double_integral(const GaussianPanel& panel, int q, int i1, int i2, BasisKind kind, const Interval& iv,
                              const TailVariate* tail = nullptr) {
    const double area = levy_area(kind, panel, q, i1, i2, iv, tail).value;
    return 0.5 * iv.length() * panel(i1, 0) * panel(i2, 0) + area;
}

/// E[(A - A^q)^2] for the untailed approximations.
inline double truncation_error_ms(BasisKind kind, int q, const Interval& iv) {
    const double l2 = iv.length() * iv.length();
    if (kind == BasisKind::Legendre) return 0.5 * l2 * (0.5 - legendre_pair_sum(q));
    return 3.0 * l2 / (2.0 * std::numbers::pi * std::numbers::pi) * inverse_square_tail(q);
}

/// E[(A - A^q)^2] for the tail-corrected trigonometric area when the tail variate is
/// built from the path's own sine modes. Untruncated, only the cosine-sine products
/// beyond q are missing; truncated at r_max, the sine-constant products beyond r_max
/// are missing as well.
inline double truncation_error_ms_tail(int q, const Interval& iv, std::optional<int> r_max = std::nullopt) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double l2 = iv.length() * iv.length();
    double v = l2 / (2.0 * pi2) * inverse_square_tail(q);
    if (r_max) v += l2 / pi2 * inverse_square_tail(std::max(*r_max, q));
    return v;
}

/// E[(A^q)^2]. Without the tail this is L^2/4 minus the truncation error; the tail
/// adds L^2/pi^2 (pi^2/6 - H_q), which leaves L^2/(2 pi^2) (pi^2/6 - H_q) short of L^2/4.
inline double approximation_variance(BasisKind kind, int q, const Interval& iv, bool tail = false) {
    const double l2 = iv.length() * iv.length();
    if (kind == BasisKind::Legendre) {
        if (tail) throw std::invalid_argument("the tail correction applies to the trigonometric area only");
        return 0.5 * l2 * legendre_pair_sum(q);
    }
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double v = 3.0 * l2 / (2.0 * pi2) * inverse_square_sum(q);
    if (tail) v += l2 / pi2 * inverse_square_tail(q);
    return v;
}

/// -L^2/8 ln(1 - 2/(2q+1)), the integral bound on the Legendre tail sum.
inline double legendre_log_bound(int q, const Interval& iv) {
    if (q < 1) throw std::invalid_argument("the logarithmic bound needs q >= 1");
    return -iv.length() * iv.length() / 8.0 * std::log1p(-2.0 / (2.0 * q + 1.0));
}

/// C with E[(A - A^q)^2] <= C L^2 / q for every q >= 1:
/// ln(3)/8 for Legendre (the logarithmic bound is largest relative to 1/q at q = 1),
/// 3/(2 pi^2) for the trigonometric system.
inline double envelope_constant(BasisKind kind) {
    return kind == BasisKind::Legendre ? std::log(3.0) / 8.0 : 3.0 / (2.0 * std::numbers::pi * std::numbers::pi);
}

inline double truncation_error_envelope(BasisKind kind, int q, const Interval& iv) {
    if (q < 1) throw std::invalid_argument("the envelope needs q >= 1");
    return envelope_constant(kind) * iv.length() * iv.length() / q;
}

/// C_{n,k} = (k!)^{2n} (n(2n-1))^{n(k-1)} (2n-1)!!.
inline double moment_constant(int n, int k) {
    if (n < 1) throw std::invalid_argument("moment order n must be >= 1");
    if (k < 1 || k > 5) throw std::invalid_argument("multiplicity k must be 1..5");
    double fact = 1.0;
    for (int i = 2; i <= k; ++i) fact *= i;
    double dfact = 1.0;
    for (int i = 2 * n - 1; i > 1; i -= 2) dfact *= i;
    return std::pow(fact, 2.0 * n) * std::pow(n * (2.0 * n - 1.0), n * (k - 1.0)) * dfact;
}

/// C_{n,k} residual^n: bound on E[(J - J^p)^{2n}] given the Parseval residual.
inline double moment_bound_2n(int n, int k, double parseval_residual) {
    if (parseval_residual < 0.0) throw std::invalid_argument("Parseval residual must be non-negative");
    return moment_constant(n, k) * std::pow(parseval_residual, n);
}

} // namespace stochint
