#include "menulab/convolution.hpp"
#include "menulab/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace menulab;

TEST(Integrate1d, ConstantAndPolynomial) {
    EXPECT_NEAR(integrate_1d([](double) { return 1.0; }, 0, 1), 1.0, 1e-14);
    EXPECT_NEAR(integrate_1d([](double x) { return 3 * x * x; }, 0, 1), 1.0, 1e-14);
}

TEST(Integrate1d, InverseSquareMatchesAntiderivative) {
    // -2/x evaluated between 1 and 2.
    const double exact = (-2.0 / 2.0) - (-2.0 / 1.0);
    EXPECT_NEAR(integrate_1d([](double x) { return 2.0 / (x * x); }, 1, 2), exact, 1e-13);
}

TEST(Integrate1d, ExactForDegree2nMinus1PerPanel) {
    const QuadratureSpec spec{4, 1};
    // degree 7 monomial on [0, 2]: 2^8 / 8
    EXPECT_NEAR(integrate_1d([](double x) { return std::pow(x, 7); }, 0, 2, spec), 32.0, 1e-11);
}

TEST(Integrate1d, NonFiniteSampleNamesAbscissa) {
    try {
        integrate_1d([](double x) { return x > 0.5 ? std::nan("") : 1.0; }, 0, 1);
        FAIL() << "expected NumericsError";
    } catch (const NumericsError& e) {
        EXPECT_NE(std::string(e.what()).find("x ="), std::string::npos) << e.what();
    }
}

TEST(Integrate1d, LinearAndAdditiveOnRandomPolynomials) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-2, 2);
    for (int trial = 0; trial < 50; ++trial) {
        double c[4];
        double e[4];
        for (int k = 0; k < 4; ++k) {
            c[k] = coef(rng);
            e[k] = coef(rng);
        }
        auto p = [&](double x) { return c[0] + x * (c[1] + x * (c[2] + x * c[3])); };
        auto q = [&](double x) { return e[0] + x * (e[1] + x * (e[2] + x * e[3])); };
        const double a = -1.0;
        const double b = 1.5;
        const double m = a + (b - a) * std::uniform_real_distribution<double>(0, 1)(rng);
        const double whole = integrate_1d(p, a, b);
        EXPECT_NEAR(whole, integrate_1d(p, a, m) + integrate_1d(p, m, b), 1e-12);
        const double lin = integrate_1d([&](double x) { return 2.5 * p(x) - q(x); }, a, b);
        EXPECT_NEAR(lin, 2.5 * whole - integrate_1d(q, a, b), 1e-12);
    }
}

TEST(Integrate2d, TensorRule) {
    const Rect unit{{0, 1}, {0, 1}};
    EXPECT_NEAR(integrate_2d([](double, double) { return 1.0; }, unit), 1.0, 1e-14);
    EXPECT_NEAR(integrate_2d([](double x, double y) { return x * y; }, unit), 0.25, 1e-14);
    EXPECT_NEAR(integrate_2d([](double, double) { return 3.0; }, unit), 3.0, 1e-13);
    EXPECT_THROW(integrate_2d([](double, double) { return 1.0; }, Rect{{0, 0}, {0, 1}}), PreconditionError);
}

TEST(MaximizeScalar, KnownMaximizers) {
    const auto a = maximize_scalar([](double p) { return p * (1 - p); }, 0, 1);
    EXPECT_NEAR(a.argmax, 0.5, 1e-6);
    EXPECT_NEAR(a.value, 0.25, 1e-12);
    // stationarity 1 - 3p^2/2 = 0
    const double ps = std::sqrt(2.0 / 3.0);
    const auto b = maximize_scalar([](double p) { return p - p * p * p / 2; }, 0, 1);
    EXPECT_NEAR(b.argmax, ps, 1e-6);
    EXPECT_NEAR(b.value, ps - ps * ps * ps / 2, 1e-12);
    const auto c = maximize_scalar([](double) { return 1.0; }, 0, 1);
    EXPECT_DOUBLE_EQ(c.value, 1.0);
}

TEST(MaximizeScalar, DominatesEveryScanPoint) {
    auto g = [](double x) { return std::sin(7 * x) + 0.3 * std::cos(19 * x); };
    const auto r = maximize_scalar(g, -1, 2);
    for (int k = 0; k < kScalarScanPoints; ++k) {
        const double x = -1 + 3.0 * k / (kScalarScanPoints - 1);
        EXPECT_GE(r.value, g(x));
    }
}

TEST(MaximizeScalar, ExtraCandidatesAreEvaluated) {
    // A spike narrower than the scan step, only reachable through the candidate.
    const double spike = 0.1234567;
    auto g = [&](double x) { return x == spike ? 10.0 : 0.0; };
    const double cand[] = {spike};
    EXPECT_DOUBLE_EQ(maximize_scalar(g, 0, 1, cand).value, 10.0);
}

TEST(NelderMead, Quadratic) {
    const auto r = nelder_mead([](const Vector& x) { return -(std::pow(x[0] - 1, 2) + std::pow(x[1] - 2, 2)); },
                               Vector{0, 0}, 4);
    EXPECT_NEAR(r.x[0], 1.0, 1e-5);
    EXPECT_NEAR(r.x[1], 2.0, 1e-5);
    EXPECT_NEAR(r.value, 0.0, 1e-9);
}

TEST(NelderMead, OneDimensionalMatchesScalarSearch) {
    auto g = [](double p) { return p - p * p * p / 2; };
    const auto s = maximize_scalar(g, 0, 1);
    const auto r = nelder_mead([&](const Vector& x) { return g(x[0]); }, Vector{0.2}, 3);
    EXPECT_NEAR(r.x[0], s.argmax, 1e-6);
    EXPECT_NEAR(r.value, s.value, 1e-12);
}

TEST(NelderMead, NonFiniteTreatedAsMinusInfinity) {
    auto h = [](const Vector& x) { return x[0] < 0 ? std::nan("") : -std::pow(x[0] - 0.3, 2); };
    const auto r = nelder_mead(h, Vector{0.05}, 2);
    EXPECT_NEAR(r.x[0], 0.3, 1e-5);
}

TEST(NelderMead, DeterministicAndDimensionGuard) {
    auto h = [](const Vector& x) { return -std::abs(x[0]) - std::abs(x[1] - 0.5); };
    const auto a = nelder_mead(h, Vector{1, 1}, 5);
    const auto b = nelder_mead(h, Vector{1, 1}, 5);
    EXPECT_EQ(a.x, b.x);
    EXPECT_THROW(nelder_mead(h, Vector(9, 0.0), 1), PreconditionError);
}

TEST(BundleCdf, Endpoints) {
    const ProductDistribution d{Density1D::uniform(0, 1), Density1D::uniform(0, 1)};
    EXPECT_DOUBLE_EQ(bundle_cdf(d, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(bundle_cdf(d, 2.0), 1.0);
    EXPECT_NEAR(bundle_cdf(d, 1.0), 0.5, 1e-12);
}

TEST(BundleCdf, MatchesMonteCarlo) {
    const ProductDistribution d{Density1D::uniform(0, 1), Density1D::power(-2, 1, 2)};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0, 1);
    const int samples = 1'000'000;
    const double ps[] = {1.3, 1.8, 2.4};
    int hits[3] = {0, 0, 0};
    for (int s = 0; s < samples; ++s) {
        const double x = unif(rng);
        // inverse of F(y) = 2 - 2/y on [1, 2]
        const double y = 2.0 / (2.0 - unif(rng));
        for (int k = 0; k < 3; ++k) hits[k] += (x + y <= ps[k]);
    }
    for (int k = 0; k < 3; ++k) {
        const double mc = static_cast<double>(hits[k]) / samples;
        EXPECT_NEAR(bundle_cdf(d, ps[k]), mc, 3e-3) << "p = " << ps[k];
    }
}

TEST(BundleCdf, MonotoneWithUnitRange) {
    const ProductDistribution d{Density1D::truncated_exponential(1.5, 0, 2), Density1D::power(1, 0.5, 1.5)};
    double prev = 0.0;
    for (double p = 0.0; p <= 4.0; p += 0.01) {
        const double v = bundle_cdf(d, p);
        EXPECT_GE(v, prev - 1e-14);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        prev = v;
    }
}

TEST(Linspace, Endpoints) {
    const auto v = linspace(1, 2, 5);
    ASSERT_EQ(v.size(), 5u);
    EXPECT_DOUBLE_EQ(v.front(), 1.0);
    EXPECT_DOUBLE_EQ(v.back(), 2.0);
}
