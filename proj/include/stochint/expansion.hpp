#pragma once

#include "stochint/fourier.hpp"
#include "stochint/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochint {

/// Components i_1..i_k of an iterated integral; 0 is the time axis, 1..m are Wiener components.
struct IndexSpec {
    std::vector<int> components;

    int k() const { return static_cast<int>(components.size()); }
    int component(int l) const { return components[static_cast<std::size_t>(l - 1)]; }
    bool uses_time_axis() const { return std::find(components.begin(), components.end(), 0) != components.end(); }

    void validate(int m) const {
        if (components.empty() || k() > max_multiplicity)
            throw std::invalid_argument("index spec multiplicity must be 1.." + std::to_string(max_multiplicity));
        for (int i : components)
            if (i < 0 || i > m) throw std::invalid_argument("component " + std::to_string(i) + " outside 0.." + std::to_string(m));
        if (uses_time_axis() && k() > 2) throw std::invalid_argument("the time axis is supported for k <= 2 only");
    }
};

struct ExpansionValue {
    double value = 0.0;
    std::vector<int> orders;
};

inline std::vector<int> equal_orders(int k, int p) { return std::vector<int>(static_cast<std::size_t>(k), p); }

/// He_k(delta; Delta) / k! for k = 1..5: the closed form of the equal-index iterated integral.
inline double hermite_reference(int k, double delta, double Delta) {
    const double d = delta;
    const double D = Delta;
    switch (k) {
    case 1: return d;
    case 2: return (d * d - D) / 2.0;
    case 3: return (d * d * d - 3.0 * d * D) / 6.0;
    case 4: return (d * d * d * d - 6.0 * d * d * D + 3.0 * D * D) / 24.0;
    case 5: return (d * d * d * d * d - 10.0 * d * d * d * D + 15.0 * d * D * D) / 120.0;
    default: throw std::invalid_argument("hermite_reference: k must be 1..5");
    }
}

/// A partial matching of the slots. Matched slots carry equal nonzero components
/// and their basis indices are contracted; the sign is (-1)^{pairs}.
struct SlotMatching {
    std::vector<std::pair<int, int>> pairs; // 0-based slots, first < second
    std::vector<int> partner;               // -1 for unmatched slots
    double sign = 1.0;

    int free_count() const { return static_cast<int>(std::count(partner.begin(), partner.end(), -1)); }
};

/// Every matching allowed by the components, the empty one first.
inline std::vector<SlotMatching> slot_matchings(const IndexSpec& spec) {
    const int k = spec.k();
    std::vector<SlotMatching> out;
    SlotMatching cur;
    cur.partner.assign(static_cast<std::size_t>(k), -1);
    std::vector<char> used(static_cast<std::size_t>(k), 0);
    auto recurse = [&](auto&& self, int from) -> void {
        int s = from;
        while (s < k && used[static_cast<std::size_t>(s)]) ++s;
        if (s >= k) {
            out.push_back(cur);
            return;
        }
        used[static_cast<std::size_t>(s)] = 1;
        self(self, s + 1);
        const int cs = spec.components[static_cast<std::size_t>(s)];
        for (int t = s + 1; t < k; ++t) {
            if (used[static_cast<std::size_t>(t)] || cs == 0 || spec.components[static_cast<std::size_t>(t)] != cs) continue;
            used[static_cast<std::size_t>(t)] = 1;
            cur.pairs.emplace_back(s, t);
            cur.partner[static_cast<std::size_t>(s)] = t;
            cur.partner[static_cast<std::size_t>(t)] = s;
            cur.sign = -cur.sign;
            self(self, s + 1);
            cur.sign = -cur.sign;
            cur.partner[static_cast<std::size_t>(s)] = -1;
            cur.partner[static_cast<std::size_t>(t)] = -1;
            cur.pairs.pop_back();
            used[static_cast<std::size_t>(t)] = 0;
        }
        used[static_cast<std::size_t>(s)] = 0;
    };
    recurse(recurse, 0);
    return out;
}

namespace detail {

/// zeta vector of one slot: the panel row of a Wiener component, or the integrals of phi_j for the time axis.
inline Eigen::VectorXd slot_vector(int component, int order, const GaussianPanel& panel, const BasisSystem* basis) {
    if (component == 0) {
        if (basis == nullptr) throw std::invalid_argument("the time axis needs the basis of the coefficient table");
        Eigen::VectorXd v(order + 1);
        for (int j = 0; j <= order; ++j) v(j) = antiderivative_phi(*basis, j, basis->interval.end());
        return v;
    }
    if (panel.max_index() < order) throw std::invalid_argument("panel does not cover truncation order " + std::to_string(order));
    return panel.values.row(component - 1).head(order + 1).transpose();
}

} // namespace detail

/// Truncated expansion from a dense coefficient table:
/// sum over the index box of C_{j_k..j_1} times the Wick-ordered product of the zetas,
/// i.e. the product with every admissible pair of equal indices on equal nonzero
/// components removed with alternating sign.
inline ExpansionValue expand(const IndexSpec& spec, const CoefficientTable& table, const GaussianPanel& panel) {
    if (spec.k() != table.k())
        throw std::invalid_argument("index spec has k=" + std::to_string(spec.k()) + " but table has k=" + std::to_string(table.k()));
    spec.validate(panel.components());
    const int k = spec.k();
    const BasisSystem* basis = table.basis() ? &*table.basis() : nullptr;
    std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(k));
    for (int l = 0; l < k; ++l)
        z[static_cast<std::size_t>(l)] = detail::slot_vector(spec.components[static_cast<std::size_t>(l)], table.orders()[static_cast<std::size_t>(l)], panel, basis);

    const double* data = table.values().data();
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    double total = 0.0;
    for (const SlotMatching& m : slot_matchings(spec)) {
        // visit slots from the outermost (largest stride) inward; slot 0 is contiguous
        auto visit = [&](auto&& self, int l, std::size_t offset, double weight) -> double {
            const auto L = static_cast<std::size_t>(l);
            const int partner = m.partner[L];
            const std::size_t stride = table.stride(l + 1);
            if (partner >= 0 && partner > l) {
                const int j = idx[static_cast<std::size_t>(partner)];
                if (j > table.orders()[L]) return 0.0;
                return l == 0 ? weight * data[offset + stride * static_cast<std::size_t>(j)]
                              : self(self, l - 1, offset + stride * static_cast<std::size_t>(j), weight);
            }
            int upper = table.orders()[L];
            if (partner >= 0) upper = std::min(upper, table.orders()[static_cast<std::size_t>(partner)]);
            const Eigen::VectorXd& zl = z[L];
            double sum = 0.0;
            if (l == 0) {
                for (int j = 0; j <= upper; ++j) sum += data[offset + static_cast<std::size_t>(j)] * (partner >= 0 ? 1.0 : zl(j));
                return weight * sum;
            }
            for (int j = 0; j <= upper; ++j) {
                idx[L] = j;
                const double w = partner >= 0 ? 1.0 : zl(j);
                if (w != 0.0) sum += self(self, l - 1, offset + stride * static_cast<std::size_t>(j), w);
            }
            return weight * sum;
        };
        total += m.sign * visit(visit, k - 1, 0, 1.0);
    }
    return {total, table.orders()};
}

/// The same truncated expansion evaluated without a dense table, for index boxes
/// too large to store (k = 4, 5 at high order).
///
/// Each matching becomes a nested integral over the simplex of the free-slot
/// functions sum_j zeta_j phi_j(t) and, per pair, the reproducing kernel
/// sum_{j <= p} phi_j(t_a) phi_j(t_b), carried as an open index between the two slots.
/// Matchings without free slots are constants and matchings with one free slot are
/// linear functionals; both are precomputed once.
class StructuredExpansion {
public:
    StructuredExpansion(const BasisSystem& basis, const Kernel& kernel, IndexSpec spec, std::vector<int> orders)
        : basis_(basis), kernel_(kernel), spec_(std::move(spec)), orders_(std::move(orders)),
          grid_(basis.interval.start(), basis.interval.end(), panels_for_orders(orders_)) {
        kernel_.validate();
        if (spec_.k() != kernel_.k) throw std::invalid_argument("index spec and kernel differ in k");
        if (static_cast<int>(orders_.size()) != spec_.k()) throw std::invalid_argument("need one truncation order per slot");
        for (int p : orders_)
            if (p < 0) throw std::invalid_argument("truncation orders must be non-negative");
        spec_.validate(std::numeric_limits<int>::max());
        const int k = spec_.k();
        phi_.resize(static_cast<std::size_t>(k));
        for (int l = 0; l < k; ++l) {
            Eigen::MatrixXd phi = basis_on_grid(basis_, grid_.points(), orders_[static_cast<std::size_t>(l)]);
            if (!kernel_.is_unit()) phi = (phi.array().colwise() * weight_on_grid(kernel_, l + 1, grid_.points()).array()).matrix();
            phi_[static_cast<std::size_t>(l)] = std::move(phi);
        }
        for (const SlotMatching& m : slot_matchings(spec_)) {
            const int nfree = m.free_count();
            if (nfree == 0) {
                constant_ += m.sign * pairs_only(m);
            } else if (nfree == 1) {
                const int e = static_cast<int>(std::find(m.partner.begin(), m.partner.end(), -1) - m.partner.begin());
                linear_.push_back({e, m.sign * split_functional(m, e)});
            } else {
                general_.push_back(general_term(m));
            }
        }
    }

    const std::vector<int>& orders() const { return orders_; }
    int grid_panels() const { return grid_.panels(); }

    ExpansionValue operator()(const GaussianPanel& panel) const {
        const std::vector<double> v = evaluate(std::span<const GaussianPanel>(&panel, 1));
        return {v[0], orders_};
    }

    /// One value per panel; panels are processed in blocks.
    std::vector<double> evaluate(std::span<const GaussianPanel> panels, int block = 32) const {
        std::vector<double> out(panels.size(), constant_);
        const int k = spec_.k();
        for (std::size_t start = 0; start < panels.size(); start += static_cast<std::size_t>(block)) {
            const auto B = static_cast<Eigen::Index>(std::min<std::size_t>(static_cast<std::size_t>(block), panels.size() - start));
            // zeta of every slot for every panel in the block: (order+1) x B
            std::vector<Eigen::MatrixXd> z(static_cast<std::size_t>(k));
            for (int l = 0; l < k; ++l) {
                const int p = orders_[static_cast<std::size_t>(l)];
                z[static_cast<std::size_t>(l)].resize(p + 1, B);
                for (Eigen::Index b = 0; b < B; ++b) {
                    const GaussianPanel& panel = panels[start + static_cast<std::size_t>(b)];
                    spec_.validate(panel.components());
                    z[static_cast<std::size_t>(l)].col(b) = detail::slot_vector(spec_.component(l + 1), p, panel, &basis_);
                }
            }
            for (const auto& [slot, functional] : linear_) {
                const Eigen::RowVectorXd v = functional.transpose() * z[static_cast<std::size_t>(slot)];
                for (Eigen::Index b = 0; b < B; ++b) out[start + static_cast<std::size_t>(b)] += v(b);
            }
            if (general_.empty()) continue;
            std::vector<Eigen::MatrixXd> g(static_cast<std::size_t>(k));
            for (int l = 0; l < k; ++l) g[static_cast<std::size_t>(l)] = phi_[static_cast<std::size_t>(l)] * z[static_cast<std::size_t>(l)];
            for (const GeneralTerm& t : general_) {
                const Eigen::RowVectorXd v = t.matching.sign * middle(t, g, B);
                for (Eigen::Index b = 0; b < B; ++b) out[start + static_cast<std::size_t>(b)] += v(b);
            }
        }
        return out;
    }

private:
    struct OpenIndex {
        int pair_slot; // slot that opened it
        int size;
    };

    struct Chain {
        Eigen::MatrixXd state; // rows: grid points; cols: batch fastest, then open indices in opening order
        std::vector<OpenIndex> open;
        Eigen::Index batch = 1;
    };

    // Slots before the first free slot and after the last one do not depend on the
    // panel: they are chained once and the batched part only covers the free span.
    struct GeneralTerm {
        SlotMatching matching;
        int first_free;
        int last_free;
        Chain prefix; // slots [0, first_free), cumulative in the upper limit
        Chain suffix; // slots (last_free, k), reverse cumulative in the lower limit
    };

    GeneralTerm general_term(const SlotMatching& m) const {
        int first = -1, last = -1;
        for (int l = 0; l < spec_.k(); ++l) {
            if (m.partner[static_cast<std::size_t>(l)] >= 0) continue;
            if (first < 0) first = l;
            last = l;
        }
        return {m, first, last, forward_chain(m, nullptr, 1, 0, first, false), reverse_chain(m, last + 1, spec_.k())};
    }

    Eigen::RowVectorXd middle(const GeneralTerm& t, const std::vector<Eigen::MatrixXd>& g, Eigen::Index B) const {
        Chain c{Eigen::MatrixXd(grid_.size(), B * t.prefix.state.cols()), t.prefix.open, B};
        for (Eigen::Index o = 0; o < t.prefix.state.cols(); ++o) c.state.middleCols(o * B, B).colwise() = t.prefix.state.col(o);
        for (int l = t.first_free; l <= t.last_free; ++l) {
            apply_slot(c, t.matching, l, &g, true);
            if (l < t.last_free) c.state = grid_.cumulative(c.state);
        }
        const std::vector<Eigen::Index> map = align_columns(t.matching, c.open, t.suffix.open);
        Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(B);
        for (std::size_t o = 0; o < map.size(); ++o) {
            const Eigen::VectorXd w = grid_.weights().cwiseProduct(t.suffix.state.col(map[o]));
            v += w.transpose() * c.state.middleCols(static_cast<Eigen::Index>(o) * B, B);
        }
        return v;
    }

    // For each column combination of the left open indices, the column of the right
    // chain that carries the same pair indices.
    static std::vector<Eigen::Index> align_columns(const SlotMatching& m, const std::vector<OpenIndex>& left,
                                                   const std::vector<OpenIndex>& right) {
        if (left.size() != right.size()) throw std::logic_error("unbalanced open indices across the free slot");
        const std::size_t n_open = left.size();
        std::vector<std::size_t> right_pos(n_open);
        Eigen::Index count = 1;
        for (std::size_t r = 0; r < n_open; ++r) {
            const int partner = m.partner[static_cast<std::size_t>(left[r].pair_slot)];
            std::size_t q = 0;
            while (right[q].pair_slot != partner) ++q;
            right_pos[r] = q;
            count *= left[r].size;
        }
        std::vector<Eigen::Index> right_stride(n_open, 1);
        for (std::size_t q = 1; q < n_open; ++q) right_stride[q] = right_stride[q - 1] * right[q - 1].size;
        std::vector<Eigen::Index> map(static_cast<std::size_t>(count));
        for (Eigen::Index col = 0; col < count; ++col) {
            Eigen::Index rem = col, rcol = 0;
            for (std::size_t r = 0; r < n_open; ++r) {
                rcol += (rem % left[r].size) * right_stride[right_pos[r]];
                rem /= left[r].size;
            }
            map[static_cast<std::size_t>(col)] = rcol;
        }
        return map;
    }

    int pair_size(int a, int b) const {
        return std::min(orders_[static_cast<std::size_t>(a)], orders_[static_cast<std::size_t>(b)]) + 1;
    }

    // Multiply the chain by slot l's factor. `first_of_pair` decides whether a matched
    // slot opens or closes its index given the sweep direction.
    void apply_slot(Chain& c, const SlotMatching& m, int l, const std::vector<Eigen::MatrixXd>* g, bool forward_sweep) const {
        const auto L = static_cast<std::size_t>(l);
        const int partner = m.partner[L];
        const Eigen::MatrixXd& phi = phi_[L];
        if (partner < 0) {
            if (g == nullptr) throw std::logic_error("free slot without free functions");
            const Eigen::MatrixXd& gl = (*g)[L];
            const Eigen::Index per = c.batch;
            for (Eigen::Index col = 0; col < c.state.cols(); ++col) c.state.col(col).array() *= gl.col(col % per).array();
            return;
        }
        const bool opens = forward_sweep ? partner > l : partner < l;
        const int n = pair_size(l, partner);
        if (opens) {
            const Eigen::Index cols = c.state.cols();
            Eigen::MatrixXd next(c.state.rows(), cols * n);
            for (int j = 0; j < n; ++j) next.middleCols(j * cols, cols) = c.state.array().colwise() * phi.col(j).array();
            c.state = std::move(next);
            c.open.push_back({l, n});
            return;
        }
        std::size_t pos = 0;
        while (c.open[pos].pair_slot != partner) ++pos;
        Eigen::Index low = c.batch;
        for (std::size_t r = 0; r < pos; ++r) low *= c.open[r].size;
        const Eigen::Index high = c.state.cols() / (low * n);
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(c.state.rows(), low * high);
        for (Eigen::Index h = 0; h < high; ++h)
            for (int j = 0; j < n; ++j)
                next.middleCols(h * low, low).array() += c.state.middleCols(low * (j + n * h), low).array().colwise() * phi.col(j).array();
        c.state = std::move(next);
        c.open.erase(c.open.begin() + static_cast<std::ptrdiff_t>(pos));
    }

    // Slots [from, to) in increasing order. With `integrate_last` the final slot is
    // integrated over the whole interval, otherwise the chain is left as a cumulative
    // integral with the upper limit as the row variable.
    Eigen::RowVectorXd forward(const SlotMatching& m, const std::vector<Eigen::MatrixXd>* g, Eigen::Index batch, int from, int to,
                               bool integrate_last) const {
        Chain c = forward_chain(m, g, batch, from, to, integrate_last);
        return c.state.row(0);
    }

    Chain forward_chain(const SlotMatching& m, const std::vector<Eigen::MatrixXd>* g, Eigen::Index batch, int from, int to,
                        bool integrate_last) const {
        Chain c{Eigen::MatrixXd::Ones(grid_.size(), batch), {}, batch};
        for (int l = from; l < to; ++l) {
            apply_slot(c, m, l, g, true);
            if (l + 1 == to && integrate_last) {
                c.state = grid_.integral(c.state);
            } else {
                c.state = grid_.cumulative(c.state);
            }
        }
        return c;
    }

    Chain reverse_chain(const SlotMatching& m, int from, int to) const {
        Chain c{Eigen::MatrixXd::Ones(grid_.size(), 1), {}, 1};
        for (int l = to - 1; l >= from; --l) {
            apply_slot(c, m, l, nullptr, false);
            c.state = grid_.reverse_cumulative(c.state);
        }
        return c;
    }

    double pairs_only(const SlotMatching& m) const {
        return forward(m, nullptr, 1, 0, spec_.k(), true)(0);
    }

    // Linear functional of the single free slot e: the chain before e meets the
    // reversed chain after e at t_e.
    Eigen::VectorXd split_functional(const SlotMatching& m, int e) const {
        const Chain left = forward_chain(m, nullptr, 1, 0, e, false);
        const Chain right = reverse_chain(m, e + 1, spec_.k());
        const std::vector<Eigen::Index> map = align_columns(m, left.open, right.open);
        Eigen::MatrixXd aligned(right.state.rows(), right.state.cols());
        for (std::size_t col = 0; col < map.size(); ++col) aligned.col(static_cast<Eigen::Index>(col)) = right.state.col(map[col]);
        const Eigen::VectorXd meet = (left.state.array() * aligned.array()).rowwise().sum();
        const Eigen::VectorXd weighted = meet.cwiseProduct(grid_.weights());
        return phi_[static_cast<std::size_t>(e)].transpose() * weighted;
    }

    BasisSystem basis_;
    Kernel kernel_;
    IndexSpec spec_;
    std::vector<int> orders_;
    CumulativeGrid grid_;
    std::vector<Eigen::MatrixXd> phi_; // weighted basis per slot on the grid
    double constant_ = 0.0;
    std::vector<std::pair<int, Eigen::VectorXd>> linear_;
    std::vector<GeneralTerm> general_;
};

} // namespace stochint
