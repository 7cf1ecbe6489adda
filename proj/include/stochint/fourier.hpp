#pragma once

#include "stochint/basis.hpp"
#include "stochint/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochint {

inline constexpr int max_multiplicity = 5;

/// K(t_1..t_k) = psi_1(t_1)...psi_k(t_k) on t_1 < ... < t_k, zero elsewhere.
/// An empty weight list means psi_l == 1 for every l.
struct Kernel {
    int k = 1;
    std::vector<std::function<double(double)>> weights;

    static Kernel unit(int k) {
        Kernel kernel{k, {}};
        kernel.validate();
        return kernel;
    }

    static Kernel weighted(std::vector<std::function<double(double)>> psi) {
        Kernel kernel{static_cast<int>(psi.size()), std::move(psi)};
        kernel.validate();
        return kernel;
    }

    bool is_unit() const { return weights.empty(); }

    /// psi_l(s), l is 1-based.
    double weight(int l, double s) const { return is_unit() ? 1.0 : weights[static_cast<std::size_t>(l - 1)](s); }

    void validate() const {
        if (k < 1 || k > max_multiplicity)
            throw std::invalid_argument("kernel multiplicity " + std::to_string(k) + " unsupported (1.." +
                                        std::to_string(max_multiplicity) + ")");
        if (!weights.empty() && static_cast<int>(weights.size()) != k)
            throw std::invalid_argument("kernel needs exactly k weight functions");
    }
};

/// Raised when a dense table would exceed the configured entry cap.
class CapacityError : public std::length_error {
public:
    CapacityError(std::uint64_t required, std::uint64_t cap)
        : std::length_error("coefficient table needs " + std::to_string(required) + " entries, cap is " + std::to_string(cap)),
          required_(required), cap_(cap) {}

    std::uint64_t required() const { return required_; }
    std::uint64_t cap() const { return cap_; }

private:
    std::uint64_t required_;
    std::uint64_t cap_;
};

inline constexpr std::uint64_t default_table_cap = std::uint64_t{1} << 26;

/// Dense C_{j_k...j_1}. Flat offset = sum_l j_l * stride_l with stride_1 = 1,
/// so j_1 varies fastest and j_k slowest.
class CoefficientTable {
public:
    CoefficientTable() = default;

    explicit CoefficientTable(std::vector<int> orders) : orders_(std::move(orders)) {
        if (orders_.empty() || static_cast<int>(orders_.size()) > max_multiplicity)
            throw std::invalid_argument("coefficient table multiplicity out of range");
        strides_.resize(orders_.size());
        std::size_t stride = 1;
        for (std::size_t l = 0; l < orders_.size(); ++l) {
            if (orders_[l] < 0) throw std::invalid_argument("truncation orders must be non-negative");
            strides_[l] = stride;
            stride *= static_cast<std::size_t>(orders_[l]) + 1;
        }
        values_.assign(stride, 0.0);
    }

    int k() const { return static_cast<int>(orders_.size()); }
    const std::vector<int>& orders() const { return orders_; }
    /// The system the coefficients were computed in, when known.
    const std::optional<BasisSystem>& basis() const { return basis_; }
    void set_basis(const BasisSystem& basis) { basis_ = basis; }
    int order(int l) const { return orders_[static_cast<std::size_t>(l - 1)]; }
    std::size_t stride(int l) const { return strides_[static_cast<std::size_t>(l - 1)]; }
    std::size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    /// idx = (j_1, ..., j_k).
    std::size_t offset(std::span<const int> idx) const {
        if (idx.size() != orders_.size()) throw std::invalid_argument("multi-index length differs from k");
        std::size_t off = 0;
        for (std::size_t l = 0; l < idx.size(); ++l) {
            if (idx[l] < 0 || idx[l] > orders_[l]) throw std::out_of_range("multi-index outside table");
            off += static_cast<std::size_t>(idx[l]) * strides_[l];
        }
        return off;
    }

    double at(std::span<const int> idx) const { return values_[offset(idx)]; }
    double at(std::initializer_list<int> idx) const { return at(std::span<const int>(idx.begin(), idx.size())); }

    double sum_of_squares() const {
        return std::transform_reduce(values_.begin(), values_.end(), 0.0, std::plus<>(), [](double v) { return v * v; });
    }

private:
    std::vector<int> orders_;
    std::vector<std::size_t> strides_;
    std::vector<double> values_;
    std::optional<BasisSystem> basis_;
};

/// CSV with columns j1..jk,value (17 significant digits), j_1 fastest.
inline void write_csv(std::ostream& os, const CoefficientTable& table) {
    for (int l = 1; l <= table.k(); ++l) os << 'j' << l << ',';
    os << "value\n";
    std::vector<int> idx(static_cast<std::size_t>(table.k()), 0);
    const auto old_precision = os.precision(17);
    for (std::size_t off = 0; off < table.size(); ++off) {
        for (int j : idx) os << j << ',';
        os << table.values()[off] << '\n';
        for (std::size_t l = 0; l < idx.size(); ++l) {
            if (++idx[l] <= table.orders()[l]) break;
            idx[l] = 0;
        }
    }
    os.precision(old_precision);
}

/// phi_j at every grid point: rows are points, columns j = 0..J.
inline Eigen::MatrixXd basis_on_grid(const BasisSystem& basis, const Eigen::VectorXd& points, int J) {
    Eigen::MatrixXd out(points.size(), J + 1);
    std::vector<double> row(static_cast<std::size_t>(J) + 1);
    for (Eigen::Index g = 0; g < points.size(); ++g) {
        eval_phi_all(basis, points(g), row);
        for (int j = 0; j <= J; ++j) out(g, j) = row[static_cast<std::size_t>(j)];
    }
    return out;
}

inline Eigen::VectorXd weight_on_grid(const Kernel& kernel, int l, const Eigen::VectorXd& points) {
    Eigen::VectorXd out(points.size());
    for (Eigen::Index g = 0; g < points.size(); ++g) out(g) = kernel.weight(l, points(g));
    return out;
}

/// Panel count for the composite grid so that every 64-node panel resolves the
/// product of basis functions up to the given orders.
inline int panels_for_orders(std::span<const int> orders) {
    long degree = 0;
    for (int p : orders) degree += p + 1;
    return static_cast<int>(std::max<long>(2, (degree + 31) / 32));
}

namespace detail {

inline double legendre_pair_coefficient(double len, int j1, int j2) {
    if (j1 == 0 && j2 == 0) return 0.5 * len;
    if (j2 == j1 + 1) return 0.5 * len / std::sqrt(4.0 * j2 * j2 - 1.0);
    if (j1 == j2 + 1) return -0.5 * len / std::sqrt(4.0 * j1 * j1 - 1.0);
    return 0.0;
}

inline void check_multi_index(const Kernel& kernel, std::span<const int> idx) {
    kernel.validate();
    if (static_cast<int>(idx.size()) != kernel.k) throw std::invalid_argument("multi-index length differs from k");
    for (int j : idx)
        if (j < 0) throw std::invalid_argument("basis indices must be non-negative");
}

} // namespace detail

/// Always by nested quadrature: integrate the innermost variable first.
inline double coefficient_quadrature(const BasisSystem& basis, const Kernel& kernel, std::span<const int> idx, int panels = 0) {
    detail::check_multi_index(kernel, idx);
    if (panels <= 0) panels = panels_for_orders(idx);
    const CumulativeGrid grid(basis.interval.start(), basis.interval.end(), panels);
    const Eigen::VectorXd& x = grid.points();
    Eigen::MatrixXd state = Eigen::MatrixXd::Ones(grid.size(), 1);
    for (int l = 1; l <= kernel.k; ++l) {
        const int j = idx[static_cast<std::size_t>(l - 1)];
        for (Eigen::Index g = 0; g < x.size(); ++g)
            state(g, 0) *= kernel.weight(l, x(g)) * eval_phi(basis, j, x(g));
        if (l < kernel.k) state = grid.cumulative(state);
    }
    return grid.integral(state)(0);
}

/// C_{j_k...j_1} for idx = (j_1, ..., j_k). Legendre with k = 2 and unit weights uses the closed form.
inline double coefficient(const BasisSystem& basis, const Kernel& kernel, std::span<const int> idx) {
    detail::check_multi_index(kernel, idx);
    if (kernel.is_unit() && kernel.k == 1) return antiderivative_phi(basis, idx[0], basis.interval.end());
    if (kernel.is_unit() && kernel.k == 2 && basis.kind == BasisKind::Legendre)
        return detail::legendre_pair_coefficient(basis.interval.length(), idx[0], idx[1]);
    return coefficient_quadrature(basis, kernel, idx);
}

inline double coefficient(const BasisSystem& basis, const Kernel& kernel, std::initializer_list<int> idx) {
    return coefficient(basis, kernel, std::span<const int>(idx.begin(), idx.size()));
}

inline std::uint64_t table_entries(std::span<const int> orders) {
    std::uint64_t n = 1;
    for (int p : orders) {
        if (p < 0) throw std::invalid_argument("truncation orders must be non-negative");
        n *= static_cast<std::uint64_t>(p) + 1;
    }
    return n;
}

/// Dense table of every coefficient with j_l <= orders[l-1].
///
/// The nested integrals are carried level by level on one composite grid with
/// all lower indices as columns; the outermost level is a single matrix product.
/// Work is split over blocks of j_1 to bound the intermediate storage.
inline CoefficientTable coefficient_table(const BasisSystem& basis, const Kernel& kernel, std::vector<int> orders,
                                          std::uint64_t cap = default_table_cap) {
    kernel.validate();
    if (static_cast<int>(orders.size()) != kernel.k) throw std::invalid_argument("need one truncation order per multiplicity");
    const std::uint64_t required = table_entries(orders);
    if (required > cap) throw CapacityError(required, cap);

    CoefficientTable table(orders);
    table.set_basis(basis);
    const int k = kernel.k;
    auto& out = table.values();

    if (kernel.is_unit() && k == 1) {
        for (int j = 0; j <= orders[0]; ++j) out[static_cast<std::size_t>(j)] = antiderivative_phi(basis, j, basis.interval.end());
        return table;
    }
    if (kernel.is_unit() && k == 2 && basis.kind == BasisKind::Legendre) {
        for (int j2 = 0; j2 <= orders[1]; ++j2)
            for (int j1 = 0; j1 <= orders[0]; ++j1)
                out[static_cast<std::size_t>(j1) + table.stride(2) * static_cast<std::size_t>(j2)] =
                    detail::legendre_pair_coefficient(basis.interval.length(), j1, j2);
        return table;
    }

    const CumulativeGrid grid(basis.interval.start(), basis.interval.end(), panels_for_orders(orders));
    const Eigen::Index G = grid.size();
    std::vector<Eigen::MatrixXd> weighted_basis(static_cast<std::size_t>(k));
    for (int l = 1; l <= k; ++l) {
        Eigen::MatrixXd phi = basis_on_grid(basis, grid.points(), orders[static_cast<std::size_t>(l - 1)]);
        if (!kernel.is_unit()) phi = phi.array().colwise() * weight_on_grid(kernel, l, grid.points()).array();
        weighted_basis[static_cast<std::size_t>(l - 1)] = std::move(phi);
    }
    if (k == 1) {
        const Eigen::RowVectorXd c = grid.integral(weighted_basis[0]);
        for (int j = 0; j <= orders[0]; ++j) out[static_cast<std::size_t>(j)] = c(j);
        return table;
    }

    // columns carried into the last level for one j_1 value
    std::size_t inner = 1;
    for (int l = 2; l < k; ++l) inner *= static_cast<std::size_t>(orders[static_cast<std::size_t>(l - 1)]) + 1;
    const std::size_t budget = std::size_t{1} << 23;
    const int n1 = orders[0] + 1;
    const int block = static_cast<int>(std::clamp<std::size_t>(budget / (static_cast<std::size_t>(G) * inner), 1, static_cast<std::size_t>(n1)));

    const Eigen::MatrixXd last_t = (weighted_basis[static_cast<std::size_t>(k - 1)].array().colwise() * grid.weights().array()).matrix().transpose();
    const std::size_t last_stride = table.stride(k);

    for (int j1_lo = 0; j1_lo < n1; j1_lo += block) {
        const int b = std::min(block, n1 - j1_lo);
        // columns: local j_1 fastest, then j_2, ..., j_{l}
        Eigen::MatrixXd state = grid.cumulative(weighted_basis[0].middleCols(j1_lo, b));
        for (int l = 2; l < k; ++l) {
            const Eigen::MatrixXd& phi = weighted_basis[static_cast<std::size_t>(l - 1)];
            const Eigen::Index cols = state.cols();
            Eigen::MatrixXd next(G, cols * phi.cols());
            for (Eigen::Index j = 0; j < phi.cols(); ++j)
                next.middleCols(j * cols, cols) = state.array().colwise() * phi.col(j).array();
            state = grid.cumulative(next);
        }
        const Eigen::MatrixXd result = last_t * state; // (p_k + 1) x (b * inner)
        for (Eigen::Index jk = 0; jk < result.rows(); ++jk) {
            for (std::size_t r = 0; r < inner; ++r) {
                const std::size_t base = static_cast<std::size_t>(jk) * last_stride + (k > 2 ? r * table.stride(2) : 0);
                for (int c = 0; c < b; ++c)
                    out[base + static_cast<std::size_t>(j1_lo + c)] = result(jk, static_cast<Eigen::Index>(r) * b + c);
            }
        }
    }
    return table;
}

/// ||K||^2 = integral over the simplex of prod psi_l(t_l)^2.
inline double kernel_norm_squared(const BasisSystem& basis, const Kernel& kernel) {
    kernel.validate();
    const double len = basis.interval.length();
    if (kernel.is_unit()) {
        double f = 1.0;
        for (int l = 1; l <= kernel.k; ++l) f *= len / l;
        return f;
    }
    const CumulativeGrid grid(basis.interval.start(), basis.interval.end(), 4 * kernel.k);
    Eigen::MatrixXd state = Eigen::MatrixXd::Ones(grid.size(), 1);
    for (int l = 1; l <= kernel.k; ++l) {
        state.col(0).array() *= weight_on_grid(kernel, l, grid.points()).array().square();
        if (l < kernel.k) state = grid.cumulative(state);
    }
    return grid.integral(state)(0);
}

/// Sum of C^2 over the truncated index box without forming the table:
/// sum_j C_j^2 = int int K(x) K(y) prod_l R_l(x_l, y_l), R_l the reproducing
/// kernel of span{phi_0..phi_{p_l}}, evaluated by nested cumulative quadrature
/// on a tensor grid.
inline double truncated_norm_squared(const BasisSystem& basis, const Kernel& kernel, std::span<const int> orders) {
    kernel.validate();
    if (static_cast<int>(orders.size()) != kernel.k) throw std::invalid_argument("need one truncation order per multiplicity");
    const CumulativeGrid grid(basis.interval.start(), basis.interval.end(), panels_for_orders(orders));
    const Eigen::Index G = grid.size();
    Eigen::MatrixXd state = Eigen::MatrixXd::Ones(G, G);
    for (int l = 1; l <= kernel.k; ++l) {
        const Eigen::MatrixXd phi = basis_on_grid(basis, grid.points(), orders[static_cast<std::size_t>(l - 1)]);
        Eigen::MatrixXd factor = phi * phi.transpose();
        if (!kernel.is_unit()) {
            const Eigen::VectorXd w = weight_on_grid(kernel, l, grid.points());
            factor = (w.asDiagonal() * factor * w.asDiagonal()).eval();
        }
        state.array() *= factor.array();
        if (l < kernel.k) {
            state = grid.cumulative(state);
            state = grid.cumulative(state.transpose()).transpose();
        }
    }
    return grid.weights().dot(state * grid.weights());
}

/// ||K||^2 - sum of C^2 over the truncated index box (nonnegative up to rounding).
inline double parseval_residual(const BasisSystem& basis, const Kernel& kernel, std::span<const int> orders,
                                std::uint64_t cap = default_table_cap) {
    const double norm = kernel_norm_squared(basis, kernel);
    const std::vector<int> ord(orders.begin(), orders.end());
    if (table_entries(ord) <= std::min<std::uint64_t>(cap, std::uint64_t{1} << 20))
        return norm - coefficient_table(basis, kernel, ord, cap).sum_of_squares();
    return norm - truncated_norm_squared(basis, kernel, orders);
}

} // namespace stochint
