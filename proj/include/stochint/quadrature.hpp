#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace stochint {

/// Gauss-Legendre rule on the reference interval [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

// P_n(x) and P_{n-1}(x) by the three-term recurrence.
inline std::pair<double, double> legendre_pair(int n, double x) {
    double prev = 1.0;
    if (n == 0) return {1.0, 0.0};
    double cur = x;
    for (int k = 2; k <= n; ++k) {
        const double next = ((2.0 * k - 1.0) * x * cur - (k - 1.0) * prev) / k;
        prev = cur;
        cur = next;
    }
    return {cur, prev};
}

} // namespace detail

/// Nodes ascending. Newton iteration on P_n from the Chebyshev-like initial guess.
inline GaussLegendreRule make_gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre rule needs at least one node");
    GaussLegendreRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, pm1] = detail::legendre_pair(n, x);
            dp = n * (x * p - pm1) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const auto [p, pm1] = detail::legendre_pair(n, x);
        dp = n * (x * p - pm1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        rule.nodes[lo] = -x;
        rule.nodes[hi] = x;
        rule.weights[lo] = w;
        rule.weights[hi] = w;
    }
    if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    return rule;
}

/// The 64-node rule used throughout the library.
inline const GaussLegendreRule& gauss_legendre_64() {
    static const GaussLegendreRule rule = make_gauss_legendre(64);
    return rule;
}

/// Composite Gauss-Legendre quadrature of f over [a, b] with equal panels of
/// width strictly below max_panel_width.
template <class F>
double integrate(F&& f, double a, double b, double max_panel_width,
                 const GaussLegendreRule& rule = gauss_legendre_64()) {
    if (!(b >= a)) throw std::invalid_argument("integrate: expected a <= b");
    if (b == a) return 0.0;
    const auto panels = static_cast<long>(std::floor((b - a) / max_panel_width)) + 1;
    const double width = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (long p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        const double mid = lo + 0.5 * width;
        double sum = 0.0;
        for (int i = 0; i < rule.size(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            sum += rule.weights[k] * f(mid + 0.5 * width * rule.nodes[k]);
        }
        total += 0.5 * width * sum;
    }
    return total;
}

/// Composite grid on [a, b] supporting exact cumulative integration of
/// piecewise polynomials of degree < nodes-per-panel.
///
/// Values live at the Gauss nodes of each panel (panel-major). The within-panel
/// operator maps nodal values v to  x_i -> integral_{panel start}^{x_i} p(v),
/// where p(v) is the interpolating polynomial; it is built from the discrete
/// Legendre transform so the construction stays well conditioned at 64 nodes.
class CumulativeGrid {
public:
    CumulativeGrid(double a, double b, int panels, const GaussLegendreRule& rule = gauss_legendre_64())
        : a_(a), b_(b), panels_(panels), n_(rule.size()) {
        if (!(b > a)) throw std::invalid_argument("CumulativeGrid: expected a < b");
        if (panels < 1) throw std::invalid_argument("CumulativeGrid: need at least one panel");
        half_width_ = 0.5 * (b - a) / panels;
        const int total = panels * n_;
        points_.resize(total);
        weights_.resize(total);
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (2.0 * p + 1.0) * half_width_;
            for (int i = 0; i < n_; ++i) {
                const auto k = static_cast<std::size_t>(i);
                points_(p * n_ + i) = mid + half_width_ * rule.nodes[k];
                weights_(p * n_ + i) = half_width_ * rule.weights[k];
            }
        }
        build_panel_operator(rule);
    }

    int size() const { return panels_ * n_; }
    int panels() const { return panels_; }
    int nodes_per_panel() const { return n_; }
    double lower() const { return a_; }
    double upper() const { return b_; }
    const Eigen::VectorXd& points() const { return points_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    /// Column-wise  x_i -> integral_a^{x_i} of each column.
    Eigen::MatrixXd cumulative(const Eigen::MatrixXd& values) const {
        Eigen::MatrixXd out(values.rows(), values.cols());
        Eigen::RowVectorXd carry = Eigen::RowVectorXd::Zero(values.cols());
        for (int p = 0; p < panels_; ++p) {
            const auto block = values.middleRows(p * n_, n_);
            out.middleRows(p * n_, n_).noalias() = panel_operator_ * block;
            out.middleRows(p * n_, n_).rowwise() += carry;
            carry.noalias() += weights_.segment(p * n_, n_).transpose() * block;
        }
        return out;
    }

    /// Column-wise  x_i -> integral_{x_i}^b of each column.
    Eigen::MatrixXd reverse_cumulative(const Eigen::MatrixXd& values) const {
        Eigen::MatrixXd fwd = cumulative(values);
        const Eigen::RowVectorXd total = weights_.transpose() * values;
        fwd = (-fwd).rowwise() + total;
        return fwd;
    }

    Eigen::RowVectorXd integral(const Eigen::MatrixXd& values) const {
        return weights_.transpose() * values;
    }

private:
    void build_panel_operator(const GaussLegendreRule& rule) {
        // Lagrange basis l_k(x) = w_k * sum_m (2m+1)/2 P_m(x_k) P_m(x), exact for m <= n-1.
        // integral_{-1}^{x} P_m = (P_{m+1}(x) - P_{m-1}(x)) / (2m+1), and x + 1 for m = 0.
        Eigen::MatrixXd legendre_at_nodes(n_ + 1, n_);
        for (int i = 0; i < n_; ++i) {
            const double x = rule.nodes[static_cast<std::size_t>(i)];
            double prev = 1.0;
            double cur = x;
            legendre_at_nodes(0, i) = 1.0;
            legendre_at_nodes(1, i) = x;
            for (int m = 1; m < n_; ++m) {
                const double next = ((2.0 * m + 1.0) * x * cur - m * prev) / (m + 1.0);
                prev = cur;
                cur = next;
                legendre_at_nodes(m + 1, i) = cur;
            }
        }
        Eigen::MatrixXd antideriv(n_, n_); // (m, i): integral_{-1}^{x_i} P_m
        for (int i = 0; i < n_; ++i) {
            antideriv(0, i) = rule.nodes[static_cast<std::size_t>(i)] + 1.0;
            for (int m = 1; m < n_; ++m)
                antideriv(m, i) = (legendre_at_nodes(m + 1, i) - legendre_at_nodes(m - 1, i)) / (2.0 * m + 1.0);
        }
        panel_operator_.resize(n_, n_);
        for (int i = 0; i < n_; ++i) {
            for (int k = 0; k < n_; ++k) {
                double s = 0.0;
                for (int m = 0; m < n_; ++m) s += 0.5 * (2.0 * m + 1.0) * legendre_at_nodes(m, k) * antideriv(m, i);
                panel_operator_(i, k) = half_width_ * rule.weights[static_cast<std::size_t>(k)] * s;
            }
        }
    }

    double a_;
    double b_;
    int panels_;
    int n_;
    double half_width_ = 0.0;
    Eigen::VectorXd points_;
    Eigen::VectorXd weights_;
    Eigen::MatrixXd panel_operator_;
};

} // namespace stochint
