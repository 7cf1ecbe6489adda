#include "stochint/expansion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace stochint;

namespace {

GaussianPanel panel_from(std::uint64_t seed, int m, int J) { return sample_panel(seed, m, J); }

// Direct three-slot Wick formula written out term by term.
double explicit_triple(const IndexSpec& s, const CoefficientTable& t, const GaussianPanel& z) {
    const int i1 = s.components[0], i2 = s.components[1], i3 = s.components[2];
    double total = 0.0;
    for (int j1 = 0; j1 <= t.order(1); ++j1)
        for (int j2 = 0; j2 <= t.order(2); ++j2)
            for (int j3 = 0; j3 <= t.order(3); ++j3) {
                const double c = t.at({j1, j2, j3});
                double w = z(i1, j1) * z(i2, j2) * z(i3, j3);
                if (i1 == i2 && j1 == j2) w -= z(i3, j3);
                if (i2 == i3 && j2 == j3) w -= z(i1, j1);
                if (i1 == i3 && j1 == j3) w -= z(i2, j2);
                total += c * w;
            }
    return total;
}

} // namespace

TEST(HermiteReference, ClosedForms) {
    EXPECT_DOUBLE_EQ(hermite_reference(2, 0.0, 1.0), -0.5);
    EXPECT_DOUBLE_EQ(hermite_reference(4, 0.0, 1.0), 0.125);
    EXPECT_DOUBLE_EQ(hermite_reference(1, 0.7, 2.0), 0.7);
    EXPECT_DOUBLE_EQ(hermite_reference(3, 2.0, 1.0), (8.0 - 6.0) / 6.0);
    EXPECT_DOUBLE_EQ(hermite_reference(5, 1.0, 1.0), (1.0 - 10.0 + 15.0) / 120.0);
    EXPECT_THROW(hermite_reference(0, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(hermite_reference(6, 1.0, 1.0), std::invalid_argument);
}

TEST(SlotMatchings, CountsAndSigns) {
    EXPECT_EQ(slot_matchings({{1, 2, 3}}).size(), 1u);
    EXPECT_EQ(slot_matchings({{1, 2, 1}}).size(), 2u);
    EXPECT_EQ(slot_matchings({{1, 1, 1, 1}}).size(), 10u);
    EXPECT_EQ(slot_matchings({{2, 2, 2, 2, 2}}).size(), 26u);
    EXPECT_EQ(slot_matchings({{0, 0}}).size(), 1u);
    for (const auto& m : slot_matchings({{1, 1, 1, 1, 1}}))
        EXPECT_EQ(m.sign, m.pairs.size() % 2 == 0 ? 1.0 : -1.0);
}

TEST(IndexSpec, Validation) {
    EXPECT_THROW(IndexSpec{}.validate(2), std::invalid_argument);
    EXPECT_THROW((IndexSpec{{1, 3}}.validate(2)), std::invalid_argument);
    EXPECT_THROW((IndexSpec{{0, 1, 1}}.validate(2)), std::invalid_argument);
    EXPECT_THROW((IndexSpec{{1, 1, 1, 1, 1, 1}}.validate(2)), std::invalid_argument);
    EXPECT_NO_THROW((IndexSpec{{0, 1}}.validate(1)));
}

TEST(Expand, PairExamples) {
    const double len = 1.7;
    const BasisSystem b{BasisKind::Legendre, {0.0, len}};
    const CoefficientTable t = coefficient_table(b, Kernel::unit(2), {0, 0});
    const GaussianPanel z = panel_from(4, 2, 0);
    EXPECT_NEAR(expand({{1, 2}}, t, z).value, len / 2 * z(1, 0) * z(2, 0), 1e-15);
    EXPECT_NEAR(expand({{2, 2}}, t, z).value, len / 2 * (z(2, 0) * z(2, 0) - 1.0), 1e-15);
}

TEST(Expand, Errors) {
    const BasisSystem b{BasisKind::Legendre, {0.0, 1.0}};
    const CoefficientTable t = coefficient_table(b, Kernel::unit(2), {3, 3});
    EXPECT_THROW(expand({{1, 2, 1}}, t, panel_from(1, 2, 3)), std::invalid_argument);
    EXPECT_THROW(expand({{1, 3}}, t, panel_from(1, 2, 3)), std::invalid_argument);
    EXPECT_THROW(expand({{1, 2}}, t, panel_from(1, 2, 2)), std::invalid_argument);
}

TEST(Expand, TimeAxisGivesWeightedIntegral) {
    // int_t^T (s - t) dw_s in Legendre terms: L^{3/2}/2 (zeta_0 + zeta_1/sqrt(3))
    const double len = 2.5;
    const BasisSystem b{BasisKind::Legendre, {1.0, 1.0 + len}};
    const CoefficientTable t = coefficient_table(b, Kernel::unit(2), {6, 6});
    const GaussianPanel z = panel_from(8, 1, 6);
    const double expected = std::pow(len, 1.5) / 2 * (z(1, 0) + z(1, 1) / std::sqrt(3.0));
    EXPECT_NEAR(expand({{0, 1}}, t, z).value, expected, 1e-13);
    // int_t^T w_s - w_t ds = L w_T - int (s - t) dw
    EXPECT_NEAR(expand({{1, 0}}, t, z).value, len * std::sqrt(len) * z(1, 0) - expected, 1e-13);
    EXPECT_NEAR(expand({{0, 0}}, t, z).value, len * len / 2, 1e-13);
}

TEST(Expand, TripleMatchesExplicitFormula) {
    for (BasisKind kind : {BasisKind::Legendre, BasisKind::Trigonometric}) {
        const BasisSystem b{kind, {0.0, 1.3}};
        const CoefficientTable t = coefficient_table(b, Kernel::unit(3), {4, 3, 5});
        const GaussianPanel z = panel_from(21, 3, 5);
        for (const IndexSpec& s : {IndexSpec{{1, 2, 3}}, IndexSpec{{1, 1, 2}}, IndexSpec{{2, 1, 2}}, IndexSpec{{3, 1, 1}}, IndexSpec{{2, 2, 2}}})
            EXPECT_NEAR(expand(s, t, z).value, explicit_triple(s, t, z), 1e-13);
    }
}

TEST(StructuredExpansion, AgreesWithDenseTable) {
    const std::vector<IndexSpec> specs = {
        {{1}}, {{1, 2}}, {{2, 2}}, {{1, 1, 1}}, {{1, 2, 1}}, {{1, 1, 1, 1}}, {{1, 2, 2, 1}}, {{2, 1, 2, 1}},
        {{1, 1, 1, 1, 1}}, {{1, 2, 1, 2, 1}}, {{1, 2, 3, 2, 1}}, {{3, 1, 2, 1, 3}},
    };
    std::vector<GaussianPanel> panels;
    for (std::uint64_t s = 0; s < 5; ++s) panels.push_back(panel_from(100 + s, 3, 6));
    for (BasisKind kind : {BasisKind::Legendre, BasisKind::Trigonometric}) {
        const BasisSystem b{kind, {0.5, 1.5}};
        for (const IndexSpec& spec : specs) {
            std::vector<int> orders;
            for (int l = 0; l < spec.k(); ++l) orders.push_back(3 + (l * 2) % 4);
            const Kernel kernel = Kernel::unit(spec.k());
            const CoefficientTable t = coefficient_table(b, kernel, orders);
            const StructuredExpansion structured(b, kernel, spec, orders);
            const std::vector<double> v = structured.evaluate(panels, 2);
            for (std::size_t p = 0; p < panels.size(); ++p)
                EXPECT_NEAR(v[p], expand(spec, t, panels[p]).value, 1e-12) << to_string(kind) << " k=" << spec.k();
        }
    }
}

TEST(StructuredExpansion, WeightedKernelAgreesWithDenseTable) {
    const BasisSystem b{BasisKind::Legendre, {0.0, 1.0}};
    const Kernel kernel = Kernel::weighted({[](double s) { return 1 + s; }, [](double s) { return std::exp(-s); },
                                            [](double s) { return s * s; }, [](double) { return 0.5; }});
    const IndexSpec spec{{1, 2, 1, 2}};
    const std::vector<int> orders{4, 4, 4, 4};
    const CoefficientTable t = coefficient_table(b, kernel, orders);
    const StructuredExpansion structured(b, kernel, spec, orders);
    for (std::uint64_t s = 0; s < 4; ++s) {
        const GaussianPanel z = panel_from(s, 2, 4);
        EXPECT_NEAR(structured(z).value, expand(spec, t, z).value, 1e-12);
    }
}

TEST(ExpansionProperty, EqualIndicesReproduceHermite) {
    const double len = 0.8;
    const BasisSystem b{BasisKind::Legendre, {0.0, len}};
    for (int k = 1; k <= 3; ++k) {
        const CoefficientTable t = coefficient_table(b, Kernel::unit(k), equal_orders(k, 64));
        IndexSpec spec{std::vector<int>(static_cast<std::size_t>(k), 1)};
        for (std::uint64_t s = 0; s < 20; ++s) {
            const GaussianPanel z = panel_from(s, 1, 64);
            const double h = hermite_reference(k, std::sqrt(len) * z(1, 0), len);
            EXPECT_NEAR(expand(spec, t, z).value, h, 1e-12 * (1 + std::abs(h))) << k;
        }
    }
    for (int k = 4; k <= 5; ++k) {
        IndexSpec spec{std::vector<int>(static_cast<std::size_t>(k), 2)};
        const StructuredExpansion structured(b, Kernel::unit(k), spec, equal_orders(k, 16));
        for (std::uint64_t s = 0; s < 5; ++s) {
            const GaussianPanel z = panel_from(s, 2, 16);
            const double h = hermite_reference(k, std::sqrt(len) * z(2, 0), len);
            EXPECT_NEAR(structured(z).value, h, 1e-12 * (1 + std::abs(h))) << k;
        }
    }
}

TEST(ExpansionProperty, OddMultiplicityHasMeanZero) {
    const BasisSystem b{BasisKind::Trigonometric, {0.0, 1.0}};
    const CoefficientTable t = coefficient_table(b, Kernel::unit(3), equal_orders(3, 6));
    const IndexSpec spec{{1, 2, 3}};
    const RandomStream root(31);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int p = 0; p < n; ++p) {
        RandomStream s = root.substream(static_cast<std::uint64_t>(p));
        const double v = expand(spec, t, sample_panel(s, 3, 6)).value;
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    EXPECT_LT(std::abs(mean), 4.0 * sd / std::sqrt(double(n)));
}

TEST(ExpansionProperty, DistinctPairSecondMomentIsCoefficientSum) {
    const RandomStream root(32);
    const int n = 100000;
    for (BasisKind kind : {BasisKind::Legendre, BasisKind::Trigonometric}) {
        const BasisSystem b{kind, {0.0, 2.0}};
        const CoefficientTable t = coefficient_table(b, Kernel::unit(2), equal_orders(2, 8));
        double sum2 = 0.0, sum4 = 0.0;
        for (int p = 0; p < n; ++p) {
            RandomStream s = root.substream(static_cast<std::uint64_t>(p));
            const double v = expand({{1, 2}}, t, sample_panel(s, 2, 8)).value;
            sum2 += v * v;
            sum4 += v * v * v * v;
        }
        const double m2 = sum2 / n;
        const double se = std::sqrt((sum4 / n - m2 * m2) / n);
        EXPECT_LT(std::abs(m2 - t.sum_of_squares()), 4.0 * se) << to_string(kind);
    }
}
