#pragma once

#include "stochint/expansion.hpp"
#include "stochint/fourier.hpp"
#include "stochint/levy_area.hpp"
#include "stochint/oracle.hpp"
#include "stochint/parallel.hpp"
#include "stochint/quadrature.hpp"
#include "stochint/rng.hpp"
#include "stochint/wiener_expansion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace stochint {

// ---------------------------------------------------------------------------
// basis checks

struct BasisCheckRow {
    BasisKind kind;
    std::string check; // "orthonormality" or "antiderivative"
    int row;           // i, or j for antiderivatives
    int col;           // j, or the sample point index
    double residual;
};

/// |int phi_i phi_j - delta_ij| for i, j <= J, and |antiderivative - quadrature| at
/// nine points per j.
inline std::vector<BasisCheckRow> run_basis_check(BasisKind kind, int J, const Interval& iv) {
    if (J < 0) throw std::invalid_argument("max basis index must be non-negative");
    const BasisSystem b{kind, iv};
    const double width = iv.length() / std::max(2, J);
    std::vector<BasisCheckRow> rows;
    for (int i = 0; i <= J; ++i)
        for (int j = 0; j <= J; ++j) {
            const double v = integrate([&](double s) { return eval_phi(b, i, s) * eval_phi(b, j, s); }, iv.start(), iv.end(), width);
            rows.push_back({kind, "orthonormality", i, j, std::abs(v - (i == j ? 1.0 : 0.0))});
        }
    for (int j = 0; j <= J; ++j)
        for (int k = 0; k <= 8; ++k) {
            const double s = k == 8 ? iv.end() : iv.start() + iv.length() * k / 8.0;
            const double q = integrate([&](double u) { return eval_phi(b, j, u); }, iv.start(), s, width);
            rows.push_back({kind, "antiderivative", j, k, std::abs(antiderivative_phi(b, j, s) - q)});
        }
    return rows;
}

// ---------------------------------------------------------------------------
// truncation error of the area against the coupled oracle

struct LevyErrorConfig {
    std::vector<BasisKind> bases{BasisKind::Legendre, BasisKind::Trigonometric};
    std::vector<int> qs{1, 2, 4, 8, 16, 32};
    int paths = 100000;
    int cells = 1 << 14;
    Interval interval{0.0, 1.0};
    std::uint64_t seed = 1;
    bool tail = false;
    int tail_modes = 0; // 0: four times the largest q
    unsigned threads = 0;
    int block = 64;

    int resolved_tail_modes() const {
        return tail_modes > 0 ? tail_modes : 4 * *std::max_element(qs.begin(), qs.end());
    }

    void validate() const {
        if (bases.empty()) throw std::invalid_argument("need at least one basis");
        if (qs.empty()) throw std::invalid_argument("q list must be non-empty");
        for (int q : qs)
            if (q < 1) throw std::invalid_argument("q values must be positive");
        if (paths < 2) throw std::invalid_argument("need at least two paths");
        if (cells < 2) throw std::invalid_argument("grid needs at least two cells");
        if (block < 1) throw std::invalid_argument("block size must be positive");
        if (tail && resolved_tail_modes() <= *std::max_element(qs.begin(), qs.end()))
            throw std::invalid_argument("tail modes must exceed every q");
    }
};

struct LevyErrorRow {
    BasisKind kind;
    int q;
    int paths;
    bool tail;
    double analytic_ms; // E[(A - A^q)^2]
    double mc_ms;
    double mc_stderr;
    double bound_2n; // C_{2,2} (analytic_ms)^2
    double mc_2n;    // sample E[(I - I^q)^4]
    double envelope; // C (T - t)^2 / q

    bool within(double sigmas) const { return std::abs(mc_ms - analytic_ms) <= sigmas * mc_stderr; }
    bool bound_holds() const { return mc_2n <= bound_2n; }
};

/// Rows sorted by q, then basis. Path k is drawn from substream k of the seed.
inline std::vector<LevyErrorRow> run_levy_error(LevyErrorConfig c) {
    c.validate();
    std::sort(c.qs.begin(), c.qs.end());
    c.qs.erase(std::unique(c.qs.begin(), c.qs.end()), c.qs.end());
    const int qmax = c.qs.back();
    const int r_max = c.resolved_tail_modes();
    const TimeGrid grid = TimeGrid::uniform(c.interval, c.cells);
    std::vector<PanelProjector> projectors;
    for (BasisKind kind : c.bases) {
        const int J = kind == BasisKind::Legendre ? qmax : (c.tail ? 2 * r_max - 1 : 2 * qmax);
        projectors.emplace_back(grid, BasisSystem{kind, c.interval}, J);
    }
    const std::size_t nb = c.bases.size(), nq = c.qs.size();
    const std::size_t per_path = nb * nq;
    // per path and (basis, q): e_A^2, e_I^4
    std::vector<double> sq(per_path * static_cast<std::size_t>(c.paths)), fourth(sq.size());
    const RandomStream root(c.seed);
    const std::size_t blocks = (static_cast<std::size_t>(c.paths) + c.block - 1) / c.block;
    parallel_for(blocks, c.threads, [&](std::size_t blk) {
        const int lo = static_cast<int>(blk) * c.block;
        const int hi = std::min(c.paths, lo + c.block);
        const int count = hi - lo;
        Eigen::MatrixXd stacked(2 * count, c.cells);
        std::vector<double> area(static_cast<std::size_t>(count)), dbl(static_cast<std::size_t>(count));
        for (int k = 0; k < count; ++k) {
            RandomStream s = root.substream(static_cast<std::uint64_t>(lo + k));
            const BrownianGridPath path = sample_grid_path(s, 2, grid);
            stacked.middleRows(2 * k, 2) = path.increments;
            const OracleResult r = oracle_integrals(path, {{1, 2}});
            area[static_cast<std::size_t>(k)] = r.pairs[0].area;
            dbl[static_cast<std::size_t>(k)] = r.pairs[0].double_integral;
        }
        for (std::size_t bi = 0; bi < nb; ++bi) {
            const Eigen::MatrixXd zeta = projectors[bi].project(stacked);
            for (int k = 0; k < count; ++k) {
                GaussianPanel panel;
                panel.values = zeta.middleRows(2 * k, 2);
                for (std::size_t qi = 0; qi < nq; ++qi) {
                    const int q = c.qs[qi];
                    std::optional<TailVariate> tail;
                    if (c.tail && c.bases[bi] == BasisKind::Trigonometric) tail = coupled_tail(panel, q, r_max);
                    const TailVariate* tp = tail ? &*tail : nullptr;
                    const double a = levy_area(c.bases[bi], panel, q, 1, 2, c.interval, tp).value;
                    const double i12 = double_integral(panel, q, 1, 2, c.bases[bi], c.interval, tp);
                    const double ea = area[static_cast<std::size_t>(k)] - a;
                    const double ei = dbl[static_cast<std::size_t>(k)] - i12;
                    const std::size_t slot = static_cast<std::size_t>(lo + k) * per_path + qi * nb + bi;
                    sq[slot] = ea * ea;
                    fourth[slot] = ei * ei * ei * ei;
                }
            }
        }
    });
    std::vector<LevyErrorRow> rows;
    for (std::size_t qi = 0; qi < nq; ++qi)
        for (std::size_t bi = 0; bi < nb; ++bi) {
            double s1 = 0.0, s2 = 0.0, s4 = 0.0;
            for (int k = 0; k < c.paths; ++k) {
                const std::size_t slot = static_cast<std::size_t>(k) * per_path + qi * nb + bi;
                s1 += sq[slot];
                s2 += sq[slot] * sq[slot];
                s4 += fourth[slot];
            }
            const double n = c.paths;
            const double mean = s1 / n;
            const double var = std::max(0.0, (s2 / n - mean * mean) * n / (n - 1.0));
            const BasisKind kind = c.bases[bi];
            const int q = c.qs[qi];
            const bool tailed = c.tail && kind == BasisKind::Trigonometric;
            const double analytic = tailed ? truncation_error_ms_tail(q, c.interval, r_max) : truncation_error_ms(kind, q, c.interval);
            rows.push_back({kind, q, c.paths, tailed, analytic, mean, std::sqrt(var / n), moment_bound_2n(2, 2, analytic), s4 / n,
                            truncation_error_envelope(kind, q, c.interval)});
        }
    return rows;
}

// ---------------------------------------------------------------------------
// equal-index expansions against the Hermite closed forms

struct HermiteConfig {
    std::vector<int> ks{1, 2, 3, 4, 5};
    int p = 64;
    int paths = 10000;
    Interval interval{0.0, 1.0};
    BasisKind kind = BasisKind::Legendre;
    std::uint64_t seed = 1;
    unsigned threads = 0;

    void validate() const {
        if (ks.empty()) throw std::invalid_argument("k list must be non-empty");
        for (int k : ks)
            if (k < 1 || k > max_multiplicity) throw std::invalid_argument("k must be 1..5");
        if (p < 0) throw std::invalid_argument("truncation order must be non-negative");
        if (paths < 1) throw std::invalid_argument("need at least one path");
    }
};

struct HermiteRow {
    BasisKind kind;
    int k;
    int p;
    int paths;
    double rms_gap;
    double max_gap;
    double predicted_rms; // sqrt(k! * Parseval residual)
    double machine_floor; // the k = 1 gap must sit below this

    bool pass() const { return k == 1 ? rms_gap <= machine_floor : rms_gap <= predicted_rms; }
};

/// Panel k is drawn from substream k of the seed with one component and indices 0..p.
inline std::vector<HermiteRow> run_hermite_check(const HermiteConfig& c) {
    c.validate();
    const BasisSystem b{c.kind, c.interval};
    const double len = c.interval.length();
    std::vector<GaussianPanel> panels(static_cast<std::size_t>(c.paths));
    const RandomStream root(c.seed);
    for (int k = 0; k < c.paths; ++k) {
        RandomStream s = root.substream(static_cast<std::uint64_t>(k));
        panels[static_cast<std::size_t>(k)] = sample_panel(s, 1, c.p);
    }
    std::vector<HermiteRow> rows;
    for (int k : c.ks) {
        const std::vector<int> orders = equal_orders(k, c.p);
        const StructuredExpansion expansion(b, Kernel::unit(k), IndexSpec{std::vector<int>(static_cast<std::size_t>(k), 1)}, orders);
        std::vector<double> gap(panels.size());
        const std::size_t chunk = 32, chunks = (panels.size() + chunk - 1) / chunk;
        parallel_for(chunks, c.threads, [&](std::size_t ci) {
            const std::size_t lo = ci * chunk, hi = std::min(panels.size(), lo + chunk);
            const std::vector<double> v = expansion.evaluate(std::span<const GaussianPanel>(panels.data() + lo, hi - lo));
            for (std::size_t i = lo; i < hi; ++i) gap[i] = v[i - lo] - hermite_reference(k, std::sqrt(len) * panels[i](1, 0), len);
        });
        double s2 = 0.0, mx = 0.0;
        for (double g : gap) {
            s2 += g * g;
            mx = std::max(mx, std::abs(g));
        }
        double fact = 1.0;
        for (int i = 2; i <= k; ++i) fact *= i;
        const double residual = std::max(0.0, parseval_residual(b, Kernel::unit(k), orders));
        rows.push_back({c.kind, k, c.p, c.paths, std::sqrt(s2 / c.paths), mx, std::sqrt(fact * residual),
                        1e-12 * std::pow(len, 0.5 * k)});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// bridge coefficient covariances

struct BridgeConfig {
    double delta = 1.0;
    int R = 3;
    int components = 2;
    int paths = 1000000;
    std::uint64_t seed = 1;
    unsigned threads = 0;

    void validate() const {
        if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("bridge length must be positive");
        if (R < 1) throw std::invalid_argument("bridge truncation must be >= 1");
        if (components < 1) throw std::invalid_argument("need at least one component");
        if (paths < 2) throw std::invalid_argument("need at least two paths");
    }
};

struct BridgeRow {
    std::string quantity; // "mean", "variance", "covariance", "endpoint"
    std::string u;
    std::string v;
    double estimate; // mean/sd, variance ratio, correlation, or max endpoint residual
    double expected;
    double tolerance;

    double deviation() const { return std::abs(estimate - expected); }
    bool pass() const { return deviation() <= tolerance; }
};

/// Every coefficient is normalized by its exact standard deviation. Means and
/// correlations must lie within 4/sqrt(n) of zero and variance ratios within
/// sqrt(2) 4/sqrt(n) of one (a sample variance has twice the spread of a mean).
inline std::vector<BridgeRow> run_bridge_check(const BridgeConfig& c) {
    c.validate();
    const int per = 2 * c.R + 1;
    const int dim = c.components * per;
    std::vector<std::string> names(static_cast<std::size_t>(dim));
    Eigen::VectorXd sd(dim);
    for (int i = 0; i < c.components; ++i) {
        const int o = i * per;
        names[static_cast<std::size_t>(o)] = "w[" + std::to_string(i + 1) + "]";
        sd(o) = std::sqrt(c.delta);
        for (int r = 1; r <= c.R; ++r) {
            const std::string idx = "[" + std::to_string(i + 1) + "," + std::to_string(r) + "]";
            names[static_cast<std::size_t>(o + r)] = "a" + idx;
            names[static_cast<std::size_t>(o + c.R + r)] = "b" + idx;
            sd(o + r) = sd(o + c.R + r) = std::sqrt(c.delta / 2.0) / (std::numbers::pi * r);
        }
    }
    // fixed-size blocks reduced in order, independent of the thread count
    const int block = 4096;
    const std::size_t blocks = (static_cast<std::size_t>(c.paths) + block - 1) / block;
    std::vector<Eigen::VectorXd> sums(blocks, Eigen::VectorXd::Zero(dim));
    std::vector<Eigen::MatrixXd> prods(blocks, Eigen::MatrixXd::Zero(dim, dim));
    std::vector<double> endpoint(blocks, 0.0);
    const RandomStream root(c.seed);
    parallel_for(blocks, c.threads, [&](std::size_t blk) {
        const int lo = static_cast<int>(blk) * block, hi = std::min(c.paths, lo + block);
        Eigen::MatrixXd X(dim, hi - lo);
        for (int k = lo; k < hi; ++k) {
            RandomStream s = root.substream(static_cast<std::uint64_t>(k));
            const BridgeCoefficients bc = sample_bridge(s, c.delta, c.R, c.components);
            for (int i = 0; i < c.components; ++i) {
                const int o = i * per;
                X(o, k - lo) = bc.w_delta(i) / sd(o);
                for (int r = 1; r <= c.R; ++r) {
                    X(o + r, k - lo) = bc.a(i, r) / sd(o + r);
                    X(o + c.R + r, k - lo) = bc.b(i, r) / sd(o + c.R + r);
                }
                endpoint[blk] = std::max(endpoint[blk], std::abs(bridge_eval(bc, i + 1, c.delta) - bc.w_delta(i)) / sd(o));
                endpoint[blk] = std::max(endpoint[blk], std::abs(bridge_eval(bc, i + 1, 0.0)) / sd(o));
            }
        }
        sums[blk] = X.rowwise().sum();
        prods[blk].noalias() = X * X.transpose();
    });
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(dim, dim);
    double ends = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        mean += sums[b];
        second += prods[b];
        ends = std::max(ends, endpoint[b]);
    }
    const double n = c.paths;
    mean /= n;
    const Eigen::MatrixXd cov = (second / n - mean * mean.transpose()) * (n / (n - 1.0));
    const double band = 4.0 / std::sqrt(n);
    std::vector<BridgeRow> rows;
    for (int u = 0; u < dim; ++u) rows.push_back({"mean", names[static_cast<std::size_t>(u)], "", mean(u), 0.0, band});
    for (int u = 0; u < dim; ++u) rows.push_back({"variance", names[static_cast<std::size_t>(u)], names[static_cast<std::size_t>(u)], cov(u, u), 1.0, std::sqrt(2.0) * band});
    for (int u = 0; u < dim; ++u)
        for (int v = u + 1; v < dim; ++v)
            rows.push_back({"covariance", names[static_cast<std::size_t>(u)], names[static_cast<std::size_t>(v)], cov(u, v), 0.0, band});
    rows.push_back({"endpoint", "all", "", ends, 0.0, 1e-12});
    return rows;
}

} // namespace stochint
