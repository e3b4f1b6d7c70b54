#include "menulab/parametric.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace menulab;

namespace {

ProductDistribution uniform_square() { return {Density1D::uniform(0, 1), Density1D::uniform(0, 1)}; }

double midpoint_revenue(const Menu& m, const ProductDistribution& d, int n) {
    const Rect r = d.rect();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = r.x.lo + (i + 0.5) * r.x.width() / n;
            const double y = r.y.lo + (j + 0.5) * r.y.width() / n;
            s += m[best_response(m, x, y).index].t * d.pdf(x, y);
        }
    return s * r.x.width() * r.y.width() / (double(n) * n);
}

}  // namespace

TEST(Instantiate, Degeneracies) {
    const auto fam = make_family(FamilyId::four_item, {{0, 1}, {0, 1}});
    const std::vector<double> bundle{1, 1, 0.8, 0.8, 0.8};
    EXPECT_EQ(instantiate(fam, bundle).menu.size(), 2u);
    const std::vector<double> sep{0, 0, 0.5, 0.6, 1.1};
    const auto s = instantiate(fam, sep);
    EXPECT_EQ(s.menu.size(), 4u);
    EXPECT_FALSE(s.clamped);

    const auto ud = make_family(FamilyId::unit_demand_five, {{1.2, 2.2}, {1.2, 2.2}});
    const std::vector<double> sym{0.3, 0.3, 1.5, 1.4, 1.5, 1.4};
    const auto m = instantiate(ud, sym).menu;
    EXPECT_EQ(m.size(), 5u);
    for (const auto& it : m.items()) {
        const double s2 = it.q1 + it.q2;
        EXPECT_TRUE(std::abs(s2) < 1e-15 || std::abs(s2 - 1) < 1e-15);
    }
}

TEST(Instantiate, ClampsAndFlags) {
    const auto fam = make_family(FamilyId::four_item, {{0, 1}, {0, 1}});
    const std::vector<double> wrong{1.5, 0, 0.5, 0.6, 0.4};
    const auto r = instantiate(fam, wrong);
    EXPECT_TRUE(r.clamped);
    EXPECT_EQ(r.params[0], 1.0);
    EXPECT_EQ(r.params[4], 0.6);
    EXPECT_THROW(instantiate(fam, std::vector<double>{1, 2}), PreconditionError);
}

TEST(OptimizeFamily, FourItemUniformSquareReachesKnownOptimum) {
    const auto d = uniform_square();
    const auto fit = optimize_family(make_family(FamilyId::four_item, d.rect()), d, 8);
    // Known optimum for two uniform items: prices 2/3 each, pair at
    // (4 - sqrt 2) / 3, revenue (12 + 2 sqrt 2) / 27.
    EXPECT_NEAR(fit.revenue, (12 + 2 * std::sqrt(2.0)) / 27, 1e-7);
    const auto eff = effective_menu(fit.menu, d.rect());
    ASSERT_EQ(eff.size(), 4u);
    EXPECT_NEAR(eff[3].t, (4 - std::sqrt(2.0)) / 3, 1e-4);
    EXPECT_NEAR(midpoint_revenue(fit.menu, d, 2000), fit.revenue, 1e-4);
}

TEST(OptimizeFamily, NestingAndDeterminism) {
    const auto d = uniform_square();
    const auto three = optimize_family(make_family(FamilyId::three_item, d.rect()), d, 8);
    const auto four = optimize_family(make_family(FamilyId::four_item, d.rect()), d, 8);
    const auto six = optimize_family(make_family(FamilyId::six_item_symmetric, d.rect()), d, 8);
    const auto bun = optimize_family(make_family(FamilyId::bundle, d.rect()), d, 8);
    EXPECT_GE(four.revenue, three.revenue - 1e-6);
    EXPECT_GE(six.revenue, four.revenue - 1e-6);
    EXPECT_GE(three.revenue, bun.revenue - 1e-6);
    const auto again = optimize_family(make_family(FamilyId::four_item, d.rect()), d, 8);
    EXPECT_EQ(again.params, four.params);
    EXPECT_EQ(again.revenue, four.revenue);
    EXPECT_THROW(optimize_family(make_family(FamilyId::four_item, d.rect()), d, 4), PreconditionError);
}

TEST(OptimizeFamily, ThreeItemOnCondition4BeatsBundle) {
    const ProductDistribution d{Density1D::uniform(2, 3), Density1D::uniform(2, 3)};
    ASSERT_TRUE(check_condition(d, 4).holds);
    const auto three = optimize_family(make_family(FamilyId::three_item, d.rect()), d, 8);
    EXPECT_GE(three.revenue, bundle_sale(d).revenue - 1e-6);
}

TEST(OptimizeFamily, SixItemNeedsIdenticalMarginals) {
    const ProductDistribution d{Density1D::uniform(0, 1), Density1D::uniform(0, 2)};
    EXPECT_THROW(optimize_family(make_family(FamilyId::six_item_symmetric, d.rect()), d, 8), PreconditionError);
}

TEST(OptimizeFamily, InverseSquareDegeneratesToBundle) {
    const ProductDistribution d{Density1D::power(-2, 1, 2), Density1D::power(-2, 1, 2)};
    const auto fit = optimize_family(make_family(FamilyId::four_item, d.rect()), d, 8);
    const auto eff = effective_menu(fit.menu, d.rect());
    ASSERT_EQ(eff.size(), 2u);
    EXPECT_EQ(eff[1].q1, 1.0);
    EXPECT_EQ(eff[1].q2, 1.0);
    EXPECT_NEAR(fit.revenue, bundle_sale(d).revenue, 1e-6);
}

TEST(RefineOnInstance, ConsistentAndImproving) {
    const auto d = uniform_square();
    const auto inst = discretize(d, 9);
    const auto fam = make_family(FamilyId::four_item, d.rect());
    const std::vector<double> start{0, 0, 0.6, 0.6, 0.9};
    const double before = instance_revenue(inst, instantiate(fam, start).menu.items());
    const auto r = refine_on_instance(fam, inst, start);
    EXPECT_GE(r.revenue, before);
    EXPECT_DOUBLE_EQ(r.revenue, instance_revenue(inst, r.menu.items()));
}

TEST(GapVsLp, FourItemClosesAndBundleDoesNot) {
    const auto d = uniform_square();
    const auto inst = discretize(d, 9);
    const double lp = solve_optimal(inst).expected_payment();
    const auto four = gap_vs_lp(make_family(FamilyId::four_item, d.rect()), d, inst, lp);
    EXPECT_LE(four.gap, 0.01);
    EXPECT_GE(four.gap, -1e-9);
    const auto bun = gap_vs_lp(make_family(FamilyId::bundle, d.rect()), d, inst, lp);
    EXPECT_GT(bun.gap, 0.0);
}
