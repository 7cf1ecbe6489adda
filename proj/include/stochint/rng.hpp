#pragma once

#include "stochint/basis.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace stochint {

/// Philox4x32-10 block function (Salmon et al., counter-based).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u;
    constexpr std::uint32_t M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u;
    constexpr std::uint32_t W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Inverse standard normal CDF, Wichura's AS241 (PPND16), relative accuracy about 1e-16.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                             4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                                 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                               3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                             4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                                 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                               6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                             2.05319162663775882187e+0) * r + 1.0);
        x = num / den;
    } else {
        r -= 5.0;
        const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                                 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                               2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                             5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                                 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                               1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                             5.99832206555887937690e-1) * r + 1.0);
        x = num / den;
    }
    return q < 0.0 ? -x : x;
}

/// Counter-based stream. The key is the seed; the counter carries a block index
/// and a 64-bit stream id, so substreams never overlap and do not depend on
/// the order in which they are created or consumed.
///
/// Uniforms use 53 bits: ((u64 >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
/// Normals are the AS241 inverse CDF of one uniform each.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_(stream_id) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    /// Independent child stream identified by (this stream, child).
    RandomStream substream(std::uint64_t child) const {
        return RandomStream(seed_, splitmix64(stream_ ^ splitmix64(child + 0x632BE59BD9B4E019ull)));
    }

    std::uint64_t next_u64() {
        if (pos_ == 2) refill();
        return buffer_[pos_++];
    }

    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() { return normal_quantile(uniform()); }

    void fill_normal(double* out, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) out[i] = normal();
    }

private:
    void refill() {
        const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                                  static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto r = philox4x32(ctr, key);
        buffer_[0] = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
        buffer_[1] = (static_cast<std::uint64_t>(r[3]) << 32) | r[2];
        ++block_;
        pos_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int pos_ = 2;
};

/// zeta_j^{(i)} for components i = 1..m (row i-1) and basis indices j = 0..J.
struct GaussianPanel {
    Eigen::MatrixXd values;
    std::uint64_t seed = 0;

    int components() const { return static_cast<int>(values.rows()); }
    int max_index() const { return static_cast<int>(values.cols()) - 1; }

    /// Component i is 1-based.
    double operator()(int i, int j) const { return values(i - 1, j); }
    double& operator()(int i, int j) { return values(i - 1, j); }
};

/// Draws row by row: component 1 indices 0..J, then component 2, ...
inline GaussianPanel sample_panel(RandomStream& stream, int m, int J) {
    if (m < 1) throw std::invalid_argument("sample_panel: need at least one component");
    if (J < 0) throw std::invalid_argument("sample_panel: max basis index must be non-negative");
    GaussianPanel panel;
    panel.seed = stream.seed();
    panel.values.resize(m, J + 1);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j <= J; ++j) panel.values(i, j) = stream.normal();
    return panel;
}

inline GaussianPanel sample_panel(std::uint64_t seed, int m, int J) {
    RandomStream stream(seed);
    return sample_panel(stream, m, J);
}

/// Partition t = tau_0 < tau_1 < ... < tau_N = T.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> points) : points_(std::move(points)) {
        if (points_.size() < 2) throw std::invalid_argument("TimeGrid: need at least one cell");
        for (std::size_t l = 0; l + 1 < points_.size(); ++l) {
            if (!std::isfinite(points_[l]) || !std::isfinite(points_[l + 1]) || !(points_[l + 1] > points_[l]))
                throw std::invalid_argument("TimeGrid: points must be finite and strictly increasing");
        }
    }

    static TimeGrid uniform(const Interval& iv, int cells) {
        if (cells < 1) throw std::invalid_argument("TimeGrid: need at least one cell");
        std::vector<double> pts(static_cast<std::size_t>(cells) + 1);
        for (int l = 0; l <= cells; ++l)
            pts[static_cast<std::size_t>(l)] = iv.start() + iv.length() * static_cast<double>(l) / cells;
        pts.back() = iv.end();
        return TimeGrid(std::move(pts));
    }

    int cells() const { return static_cast<int>(points_.size()) - 1; }
    double point(int l) const { return points_[static_cast<std::size_t>(l)]; }
    double width(int l) const { return point(l + 1) - point(l); }
    const std::vector<double>& points() const { return points_; }
    Interval interval() const { return {points_.front(), points_.back()}; }

private:
    std::vector<double> points_;
};

/// Wiener increments over each grid cell; row i-1 holds component i.
struct BrownianGridPath {
    TimeGrid grid;
    Eigen::MatrixXd increments;

    int components() const { return static_cast<int>(increments.rows()); }
};

/// Draws component by component, cell by cell.
inline BrownianGridPath sample_grid_path(RandomStream& stream, int m, const TimeGrid& grid) {
    if (m < 1) throw std::invalid_argument("sample_grid_path: need at least one component");
    BrownianGridPath path{grid, Eigen::MatrixXd(m, grid.cells())};
    std::vector<double> scale(static_cast<std::size_t>(grid.cells()));
    for (int l = 0; l < grid.cells(); ++l) scale[static_cast<std::size_t>(l)] = std::sqrt(grid.width(l));
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < grid.cells(); ++l) path.increments(i, l) = scale[static_cast<std::size_t>(l)] * stream.normal();
    return path;
}

inline BrownianGridPath sample_grid_path(std::uint64_t seed, int m, const TimeGrid& grid) {
    RandomStream stream(seed);
    return sample_grid_path(stream, m, grid);
}

/// Left-point projection zeta_j^{(i)} ~ sum_l phi_j(tau_l) dw_l^{(i)}, precomputed for
/// one grid so that many paths can be projected with a single matrix product.
class PanelProjector {
public:
    PanelProjector(const TimeGrid& grid, const BasisSystem& basis, int J) : J_(J) {
        if (J < 0) throw std::invalid_argument("panel projection: max basis index must be non-negative");
        if (!(grid.interval() == basis.interval))
            throw std::invalid_argument("panel projection: basis interval differs from path interval");
        phi_.resize(grid.cells(), J + 1);
        std::vector<double> row(static_cast<std::size_t>(J) + 1);
        for (int l = 0; l < grid.cells(); ++l) {
            eval_phi_all(basis, grid.point(l), row);
            for (int j = 0; j <= J; ++j) phi_(l, j) = row[static_cast<std::size_t>(j)];
        }
        // phi_0 is constant in both systems, so the zeroth entry is the scaled total increment
        phi_.col(0).setConstant(1.0 / std::sqrt(basis.interval.length()));
    }

    int max_index() const { return J_; }
    int cells() const { return static_cast<int>(phi_.rows()); }
    const Eigen::MatrixXd& design() const { return phi_; }

    /// rows of `increments` are (path, component) pairs; result has one row per input row.
    Eigen::MatrixXd project(const Eigen::MatrixXd& increments) const {
        if (increments.cols() != phi_.rows()) throw std::invalid_argument("panel projection: grid size mismatch");
        return increments * phi_;
    }

    GaussianPanel project(const BrownianGridPath& path) const {
        GaussianPanel panel;
        panel.values = project(path.increments);
        return panel;
    }

private:
    int J_;
    Eigen::MatrixXd phi_;
};

inline GaussianPanel panel_from_path(const BrownianGridPath& path, const BasisSystem& basis, int J) {
    return PanelProjector(path.grid, basis, J).project(path);
}

} // namespace stochint
