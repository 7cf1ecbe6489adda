#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stochint {

/// Time interval [t, T] with T > t.
class Interval {
public:
    Interval(double t, double T) : t_(t), T_(T) {
        if (!std::isfinite(t) || !std::isfinite(T) || !(T > t))
            throw std::invalid_argument("Interval: expected finite t < T");
    }

    double start() const { return t_; }
    double end() const { return T_; }
    double length() const { return T_ - t_; }
    bool contains(double s) const { return s >= t_ && s <= T_; }

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double t_;
    double T_;
};

enum class BasisKind { Legendre, Trigonometric };

inline std::string_view to_string(BasisKind kind) {
    return kind == BasisKind::Legendre ? "legendre" : "trig";
}

inline BasisKind parse_basis_kind(std::string_view name) {
    if (name == "legendre") return BasisKind::Legendre;
    if (name == "trig" || name == "trigonometric") return BasisKind::Trigonometric;
    throw std::invalid_argument("unknown basis '" + std::string(name) + "'");
}

/// Complete orthonormal system {phi_j} in L2([t, T]).
///
/// Legendre: phi_j(s) = sqrt((2j+1)/(T-t)) P_j(x), x the affine image of s in [-1, 1].
/// Trigonometric: phi_0 = 1/sqrt(T-t), phi_{2r-1} = sqrt(2/(T-t)) sin(2 pi r (s-t)/(T-t)),
/// phi_{2r} = sqrt(2/(T-t)) cos(2 pi r (s-t)/(T-t)).
struct BasisSystem {
    BasisKind kind;
    Interval interval;
};

namespace detail {

inline void check_domain(const BasisSystem& basis, int j, double s) {
    if (j < 0) throw std::invalid_argument("basis index must be non-negative");
    if (!basis.interval.contains(s))
        throw std::domain_error("basis evaluation point " + std::to_string(s) + " outside [" +
                                std::to_string(basis.interval.start()) + ", " +
                                std::to_string(basis.interval.end()) + "]");
}

inline double to_reference(const Interval& iv, double s) {
    return (s - iv.start() - 0.5 * iv.length()) * (2.0 / iv.length());
}

inline double legendre_p(int n, double x) {
    if (n == 0) return 1.0;
    double prev = 1.0;
    double cur = x;
    for (int k = 2; k <= n; ++k) {
        const double next = ((2.0 * k - 1.0) * x * cur - (k - 1.0) * prev) / k;
        prev = cur;
        cur = next;
    }
    return cur;
}

inline double eval_unchecked(const BasisSystem& basis, int j, double s) {
    const Interval& iv = basis.interval;
    const double len = iv.length();
    if (basis.kind == BasisKind::Legendre)
        return std::sqrt((2.0 * j + 1.0) / len) * legendre_p(j, to_reference(iv, s));
    if (j == 0) return 1.0 / std::sqrt(len);
    const int r = (j + 1) / 2;
    const double arg = 2.0 * std::numbers::pi * r * (s - iv.start()) / len;
    const double amp = std::sqrt(2.0 / len);
    return (j % 2 == 1) ? amp * std::sin(arg) : amp * std::cos(arg);
}

} // namespace detail

/// phi_j(s). Throws std::domain_error for s outside the interval.
inline double eval_phi(const BasisSystem& basis, int j, double s) {
    detail::check_domain(basis, j, s);
    return detail::eval_unchecked(basis, j, s);
}

/// phi_0(s), ..., phi_{out.size()-1}(s) in one pass.
inline void eval_phi_all(const BasisSystem& basis, double s, std::span<double> out) {
    if (out.empty()) return;
    detail::check_domain(basis, 0, s);
    const Interval& iv = basis.interval;
    const double len = iv.length();
    const auto count = static_cast<int>(out.size());
    if (basis.kind == BasisKind::Legendre) {
        const double x = detail::to_reference(iv, s);
        double prev = 1.0;
        double cur = x;
        out[0] = std::sqrt(1.0 / len);
        if (count > 1) out[1] = std::sqrt(3.0 / len) * x;
        for (int k = 2; k < count; ++k) {
            const double next = ((2.0 * k - 1.0) * x * cur - (k - 1.0) * prev) / k;
            prev = cur;
            cur = next;
            out[static_cast<std::size_t>(k)] = std::sqrt((2.0 * k + 1.0) / len) * cur;
        }
        return;
    }
    out[0] = 1.0 / std::sqrt(len);
    const double amp = std::sqrt(2.0 / len);
    const double base = 2.0 * std::numbers::pi * (s - iv.start()) / len;
    for (int j = 1; j < count; ++j) {
        const int r = (j + 1) / 2;
        out[static_cast<std::size_t>(j)] = (j % 2 == 1) ? amp * std::sin(base * r) : amp * std::cos(base * r);
    }
}

/// integral_t^s phi_j(tau) dtau, closed form in both systems.
inline double antiderivative_phi(const BasisSystem& basis, int j, double s) {
    detail::check_domain(basis, j, s);
    const Interval& iv = basis.interval;
    const double len = iv.length();
    if (s == iv.start()) return 0.0;
    if (j == 0) return (s - iv.start()) / std::sqrt(len);
    // phi_j is orthogonal to the constant phi_0 for j >= 1
    if (s == iv.end()) return 0.0;
    if (basis.kind == BasisKind::Legendre) {
        const double up = detail::eval_unchecked(basis, j + 1, s) / std::sqrt((2.0 * j + 1.0) * (2.0 * j + 3.0));
        const double down = detail::eval_unchecked(basis, j - 1, s) / std::sqrt(4.0 * j * j - 1.0);
        return 0.5 * len * (up - down);
    }
    const int r = (j + 1) / 2;
    const double scale = len / (2.0 * std::numbers::pi * r);
    if (j % 2 == 0) return scale * detail::eval_unchecked(basis, 2 * r - 1, s);
    return scale * (std::sqrt(2.0) * detail::eval_unchecked(basis, 0, s) - detail::eval_unchecked(basis, 2 * r, s));
}

} // namespace stochint
