#pragma once

#include "menulab/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace menulab {

/// Composite Gauss–Legendre rule: `order` nodes on each of `panels` equal panels.
struct QuadratureSpec {
    int order = 8;
    int panels = 64;
};

struct ToleranceConfig {
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
    double clustering_tol = 5e-3;  // L-inf distance between menu items
    double slope_tol = 1e-4;       // slope jump that opens a new linear segment
};

inline void check(const QuadratureSpec& spec) {
    if (spec.order < 2 || spec.panels < 1) {
        throw PreconditionError("QuadratureSpec requires order >= 2 and panels >= 1");
    }
}

inline void check(const ToleranceConfig& tol) {
    if (!(tol.abs_tol > 0 && tol.rel_tol > 0 && tol.clustering_tol > 0 && tol.slope_tol > 0)) {
        throw PreconditionError("ToleranceConfig entries must be strictly positive");
    }
}

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
};

struct Rect {
    Interval x;
    Interval y;
};

/// Nodes and weights on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

inline GaussLegendreRule make_gauss_legendre(int n) {
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace detail

inline constexpr int kMaxQuadratureOrder = 64;

/// Cached rule for 2 <= order <= 64; thread-safe after first use.
inline const GaussLegendreRule& gauss_legendre(int order) {
    static const std::vector<GaussLegendreRule> rules = [] {
        std::vector<GaussLegendreRule> r(kMaxQuadratureOrder + 1);
        for (int n = 2; n <= kMaxQuadratureOrder; ++n) r[n] = detail::make_gauss_legendre(n);
        return r;
    }();
    if (order < 2 || order > kMaxQuadratureOrder) {
        throw PreconditionError("Gauss-Legendre order must lie in [2, 64]");
    }
    return rules[order];
}

namespace detail {

[[noreturn]] inline void throw_non_finite(double x) {
    std::ostringstream os;
    os.precision(17);
    os << "integrand is not finite at x = " << x;
    throw NumericsError(os.str());
}

[[noreturn]] inline void throw_non_finite(double x, double y) {
    std::ostringstream os;
    os.precision(17);
    os << "integrand is not finite at (x, y) = (" << x << ", " << y << ")";
    throw NumericsError(os.str());
}

}  // namespace detail

/// Composite Gauss–Legendre estimate of the integral of `f` over [a, b].
template <typename F>
double integrate_1d(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
    check(spec);
    if (!(a <= b)) throw PreconditionError("integrate_1d requires a <= b");
    if (a == b) return 0.0;
    const auto& rule = gauss_legendre(spec.order);
    const double h = (b - a) / spec.panels;
    double total = 0.0;
    for (int p = 0; p < spec.panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        double panel = 0.0;
        for (int k = 0; k < spec.order; ++k) {
            const double x = mid + 0.5 * h * rule.nodes[k];
            const double v = f(x);
            if (!std::isfinite(v)) detail::throw_non_finite(x);
            panel += rule.weights[k] * v;
        }
        total += 0.5 * h * panel;
    }
    return total;
}

/// Tensor-product rule over a rectangle; both axes use `spec`.
template <typename F>
double integrate_2d(F&& f, const Rect& rect, const QuadratureSpec& spec = {}) {
    check(spec);
    if (!(rect.x.lo < rect.x.hi) || !(rect.y.lo < rect.y.hi)) {
        throw PreconditionError("integrate_2d requires a non-degenerate rectangle");
    }
    return integrate_1d(
        [&](double x) {
            return integrate_1d(
                [&](double y) {
                    const double v = f(x, y);
                    if (!std::isfinite(v)) detail::throw_non_finite(x, y);
                    return v;
                },
                rect.y.lo, rect.y.hi, spec);
        },
        rect.x.lo, rect.x.hi, spec);
}

struct ScalarMax {
    double argmax = 0.0;
    double value = -std::numeric_limits<double>::infinity();
};

inline constexpr int kScalarScanPoints = 1025;

/// Grid scan followed by golden-section refinement of the best bracket.
/// Extra candidate abscissae (e.g. support endpoints) are always evaluated.
template <typename G>
ScalarMax maximize_scalar(G&& g, double a, double b, std::span<const double> extra_candidates = {}) {
    if (!(a < b)) throw PreconditionError("maximize_scalar requires a < b");
    const int n = kScalarScanPoints;
    const double step = (b - a) / (n - 1);
    ScalarMax best;
    int best_k = 0;
    for (int k = 0; k < n; ++k) {
        const double x = (k == n - 1) ? b : a + k * step;
        const double v = g(x);
        if (v > best.value) {
            best = {x, v};
            best_k = k;
        }
    }

    double lo = a + std::max(0, best_k - 1) * step;
    double hi = std::min(b, a + (best_k + 1) * step);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double gc = g(c);
    double gd = g(d);
    const double target = 1e-10 * (b - a);
    while (hi - lo > target) {
        if (gc >= gd) {
            hi = d;
            d = c;
            gd = gc;
            c = hi - inv_phi * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + inv_phi * (hi - lo);
            gd = g(d);
        }
    }
    const double xm = 0.5 * (lo + hi);
    for (const auto& [x, v] : {std::pair{c, gc}, std::pair{d, gd}, std::pair{xm, g(xm)}}) {
        if (v > best.value) best = {x, v};
    }
    for (double x : extra_candidates) {
        if (x < a || x > b) continue;
        const double v = g(x);
        if (v > best.value) best = {x, v};
    }
    return best;
}

using Vector = std::vector<double>;

struct NelderMeadOptions {
    double initial_step = 0.1;
    int max_evaluations = 5000;
    double diameter_tol = 1e-8;
    std::uint64_t seed = 0x6d656e756c6162ULL;
};

struct NelderMeadResult {
    Vector x;
    double value = -std::numeric_limits<double>::infinity();
    int evaluations = 0;
};

namespace detail {

template <typename H>
NelderMeadResult nelder_mead_run(H& h, const Vector& x0, const NelderMeadOptions& opt) {
    const std::size_t dim = x0.size();
    auto eval = [&](const Vector& x) {
        const double v = h(x);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };

    std::vector<Vector> simplex(dim + 1, x0);
    for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += opt.initial_step;
    std::vector<double> values(dim + 1);
    int evals = 0;
    for (std::size_t i = 0; i <= dim; ++i) {
        values[i] = eval(simplex[i]);
        ++evals;
    }

    std::vector<std::size_t> order(dim + 1);
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t i = 1; i <= dim; ++i)
            for (std::size_t k = 0; k < dim; ++k) d = std::max(d, std::abs(simplex[i][k] - simplex[0][k]));
        return d;
    };

    while (evals < opt.max_evaluations) {
        for (std::size_t i = 0; i <= dim; ++i) order[i] = i;
        // Best (largest) first; index breaks ties so runs are reproducible.
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (values[a] != values[b]) return values[a] > values[b];
            return a < b;
        });
        {
            std::vector<Vector> s2(dim + 1);
            std::vector<double> v2(dim + 1);
            for (std::size_t i = 0; i <= dim; ++i) {
                s2[i] = simplex[order[i]];
                v2[i] = values[order[i]];
            }
            simplex.swap(s2);
            values.swap(v2);
        }
        if (diameter() < opt.diameter_tol) break;

        Vector centroid(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[i][k] / dim;

        auto along = [&](double coef) {
            Vector p(dim);
            for (std::size_t k = 0; k < dim; ++k) p[k] = centroid[k] + coef * (simplex[dim][k] - centroid[k]);
            return p;
        };

        const Vector xr = along(-1.0);
        const double fr = eval(xr);
        ++evals;
        if (fr > values[0]) {
            const Vector xe = along(-2.0);
            const double fe = eval(xe);
            ++evals;
            if (fe > fr) {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if (fr > values[dim - 1]) {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        const bool outside = fr > values[dim];
        const Vector xc = along(outside ? -0.5 : 0.5);
        const double fc = eval(xc);
        ++evals;
        if (outside ? fc >= fr : fc > values[dim]) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= dim; ++i) {
            for (std::size_t k = 0; k < dim; ++k) simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
            values[i] = eval(simplex[i]);
            ++evals;
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= dim; ++i)
        if (values[i] > values[best]) best = i;
    return {simplex[best], values[best], evals};
}

}  // namespace detail

inline constexpr std::size_t kMaxNelderMeadDimension = 8;

/// Maximizes `h` from each start point and keeps the best run. Earlier starts
/// win exact ties.
template <typename H>
NelderMeadResult nelder_mead(H&& h, std::span<const Vector> starts, const NelderMeadOptions& opt = {}) {
    if (starts.empty()) throw PreconditionError("nelder_mead needs at least one start point");
    const std::size_t dim = starts.front().size();
    if (dim == 0 || dim > kMaxNelderMeadDimension) {
        throw PreconditionError("nelder_mead supports dimensions 1..8");
    }
    NelderMeadResult best;
    int total = 0;
    for (const auto& x0 : starts) {
        if (x0.size() != dim) throw PreconditionError("nelder_mead start points differ in dimension");
        auto run = detail::nelder_mead_run(h, x0, opt);
        total += run.evaluations;
        if (best.x.empty() || run.value > best.value) best = std::move(run);
    }
    best.evaluations = total;
    return best;
}

/// Multi-start from `x0` plus `restarts - 1` seeded perturbations of it.
template <typename H>
NelderMeadResult nelder_mead(H&& h, const Vector& x0, int restarts, const NelderMeadOptions& opt = {}) {
    if (restarts < 1) throw PreconditionError("nelder_mead requires restarts >= 1");
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Vector> starts{x0};
    for (int r = 1; r < restarts; ++r) {
        Vector x = x0;
        for (double& v : x) v += 5.0 * opt.initial_step * unit(rng);
        starts.push_back(std::move(x));
    }
    return nelder_mead(std::forward<H>(h), std::span<const Vector>(starts), opt);
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw PreconditionError("linspace requires n >= 1");
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    v.back() = hi;
    return v;
}

}  // namespace menulab
