#pragma once

#include "menulab/convolution.hpp"
#include "menulab/distributions.hpp"
#include "menulab/errors.hpp"
#include "menulab/mechanism.hpp"
#include "menulab/menu_analysis.hpp"
#include "menulab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace menulab {

/// Shifts every payment up by the lowest type's utility so that type is left
/// with zero surplus; all utilities drop by the same constant.
inline GridMechanism normalize_lowest_type(const GridMechanism& gm, double tol = 1e-9) {
    gm.check_shape();
    const double shift = gm.u(0, 0);
    GridMechanism out = gm;
    out.t.array() += shift;
    out.u.array() -= shift;
    const auto rep = validate(out, {}, tol);
    if (!rep.ok()) throw Error("normalize_lowest_type produced an invalid mechanism: " + rep.describe());
    return out;
}

/// Utility restricted to the bottom edge (AB, coordinate x at y = yA) or the
/// left edge (AC, coordinate y at x = xA), piecewise linear between `coords`.
struct EdgeProfile {
    Edge edge = Edge::AB;
    std::vector<double> coords;
    std::vector<double> values;

    [[nodiscard]] double operator()(double s) const {
        const auto it = std::upper_bound(coords.begin(), coords.end(), s);
        std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - coords.begin()) - 1));
        k = std::min(k, coords.size() - 2);
        const double w = (s - coords[k]) / (coords[k + 1] - coords[k]);
        return (1 - w) * values[k] + w * values[k + 1];
    }

    [[nodiscard]] std::vector<double> chord_slopes() const {
        std::vector<double> s;
        for (std::size_t k = 0; k + 1 < coords.size(); ++k)
            s.push_back((values[k + 1] - values[k]) / (coords[k + 1] - coords[k]));
        return s;
    }

    /// Throws unless the profile is convex, nonnegative, zero at its first
    /// node and has slopes within [0, 1] (all up to `tol`).
    void check(double tol) const {
        const std::string name(to_string(edge));
        if (coords.size() < 2 || coords.size() != values.size()) {
            throw PreconditionError("edge profile " + name + " needs at least two matching samples");
        }
        for (std::size_t k = 1; k < coords.size(); ++k)
            if (!(coords[k] > coords[k - 1])) throw PreconditionError("edge profile " + name + ": coordinates not increasing");
        if (std::abs(values.front()) > tol) throw PreconditionError("edge profile " + name + " is not zero at A");
        for (double v : values)
            if (v < -tol) throw PreconditionError("edge profile " + name + " is negative");
        // Tolerances act on values, not slopes: nearly coincident nodes
        // would otherwise turn rounding noise into large slope errors.
        const auto s = chord_slopes();
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double h = coords[k + 1] - coords[k];
            if (s[k] * h < -tol || (s[k] - 1) * h > tol) {
                throw PreconditionError("edge profile " + name + " has a slope outside [0, 1]: " + std::to_string(s[k]));
            }
            if (k > 0 && (s[k - 1] - s[k]) * std::min(h, coords[k] - coords[k - 1]) > tol) {
                throw PreconditionError("edge profile " + name + " is not convex");
            }
        }
    }
};

/// The plane x q1 + y q2 + k.
struct SupportPlane {
    double q1 = 0.0;
    double q2 = 0.0;
    double k = 0.0;

    [[nodiscard]] double operator()(double x, double y) const { return x * q1 + y * q2 + k; }
    [[nodiscard]] MenuItem item() const { return {q1, q2, -k}; }
};

struct SupremumResult {
    GridMechanism mechanism;           // u* on a grid_n x grid_n grid spanning the rectangle
    std::vector<SupportPlane> planes;  // distinct planes after both steps
    std::size_t seeds = 0;
    std::size_t capped_rotations = 0;  // rotations stopped by the slope cap
    std::size_t multiplicity = 0;      // seeds mapped onto an already-present plane
};

namespace detail {

// Largest intercept keeping the plane with slopes (q1, q2) weakly below both
// profiles, and which edge it touches first (0: AB, 1: AC, 2: both).
inline std::pair<double, int> translate(const EdgeProfile& ab, const EdgeProfile& ac, double q1, double q2, double xa,
                                        double ya, double tol) {
    double kab = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ab.coords.size(); ++i) kab = std::min(kab, ab.values[i] - q1 * ab.coords[i] - q2 * ya);
    double kac = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ac.coords.size(); ++j) kac = std::min(kac, ac.values[j] - q1 * xa - q2 * ac.coords[j]);
    if (std::abs(kab - kac) <= tol) return {std::min(kab, kac), 2};
    return kab < kac ? std::pair{kab, 0} : std::pair{kac, 1};
}

// Largest slope s for the line base + s (c - c0) to stay below the profile,
// i.e. the minimal ratio over the profile's nodes beyond c0.
inline double max_rotation(const EdgeProfile& p, double base, double c0) {
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.coords.size(); ++j) {
        const double dc = p.coords[j] - c0;
        if (dc <= 0) continue;
        s = std::min(s, (p.values[j] - base) / dc);
    }
    return s;
}

}  // namespace detail

/// Supremum of seed planes pushed up by translation (until first contact
/// with either edge profile) and rotation about the touched edge line (until
/// contact with the other profile or until the free slope reaches 1). Seeds
/// are all slope pairs built from the profiles' chord slopes together with 0
/// and 1, plus any `extra_seeds` (only their slopes are used).
inline SupremumResult two_step_supremum(const EdgeProfile& ab, const EdgeProfile& ac, const Rect& rect, int grid_n,
                                        std::span<const MenuItem> extra_seeds = {}, double tol = 1e-9) {
    if (ab.edge != Edge::AB || ac.edge != Edge::AC) throw PreconditionError("two_step_supremum expects AB and AC profiles");
    ab.check(tol);
    ac.check(tol);
    if (grid_n < 2) throw PreconditionError("two_step_supremum requires grid_n >= 2");
    const double xa = rect.x.lo;
    const double ya = rect.y.lo;

    std::set<double> s1{0.0, 1.0};
    std::set<double> s2{0.0, 1.0};
    for (double s : ab.chord_slopes()) s1.insert(std::clamp(s, 0.0, 1.0));
    for (double s : ac.chord_slopes()) s2.insert(std::clamp(s, 0.0, 1.0));
    std::vector<std::pair<double, double>> seeds;
    for (double a : s1)
        for (double b : s2) seeds.emplace_back(a, b);
    for (const auto& m : extra_seeds) seeds.emplace_back(m.q1, m.q2);

    SupremumResult res;
    res.seeds = seeds.size();
    for (const auto& [q1, q2] : seeds) {
        auto [k, touched] = detail::translate(ab, ac, q1, q2, xa, ya, tol);
        SupportPlane p{q1, q2, k};
        if (touched == 0) {
            // Keep the line on y = yA; tilt in y until AC is reached.
            const double base = p(xa, ya);
            double s = detail::max_rotation(ac, base, ya);
            if (s >= 1.0) {
                s = 1.0;
                ++res.capped_rotations;
            }
            s = std::max(s, q2);
            p = {q1, s, base - q1 * xa - s * ya};
        } else if (touched == 1) {
            const double base = p(xa, ya);
            double s = detail::max_rotation(ab, base, xa);
            if (s >= 1.0) {
                s = 1.0;
                ++res.capped_rotations;
            }
            s = std::max(s, q1);
            p = {s, q2, base - s * xa - q2 * ya};
        }
        bool dup = false;
        for (const auto& e : res.planes) {
            if (std::abs(e.q1 - p.q1) <= tol && std::abs(e.q2 - p.q2) <= tol && std::abs(e.k - p.k) <= tol) dup = true;
        }
        if (dup) {
            ++res.multiplicity;
        } else {
            res.planes.push_back(p);
        }
    }
    std::vector<MenuItem> items;
    for (const auto& p : res.planes) items.push_back(p.item());
    res.mechanism = mechanism_from_menu(Menu(items, tol), linspace(rect.x.lo, rect.x.hi, grid_n),
                                        linspace(rect.y.lo, rect.y.hi, grid_n));
    return res;
}

namespace detail {

inline std::vector<MenuItem> distinct_items(const GridMechanism& gm, double tol = 1e-12) {
    std::vector<MenuItem> out;
    for (int i = 0; i < gm.nx(); ++i)
        for (int j = 0; j < gm.ny(); ++j) {
            const MenuItem it = gm.item(i, j);
            bool seen = false;
            for (const auto& e : out) seen = seen || linf_distance(e, it) <= tol;
            if (!seen) out.push_back(it);
        }
    return out;
}

// Sample coordinates along an edge: a uniform grid plus every crossing of two
// item lines, so the piecewise-linear envelope is represented exactly.
inline std::vector<double> envelope_coords(const std::vector<MenuItem>& items, Edge e, const Rect& rect, int n) {
    const bool along_x = e == Edge::AB;
    const Interval iv = along_x ? rect.x : rect.y;
    const double fixed = along_x ? rect.y.lo : rect.x.lo;
    std::vector<double> c = linspace(iv.lo, iv.hi, n);
    for (std::size_t a = 0; a < items.size(); ++a) {
        for (std::size_t b = a + 1; b < items.size(); ++b) {
            const double sa = along_x ? items[a].q1 : items[a].q2;
            const double sb = along_x ? items[b].q1 : items[b].q2;
            const double ia = (along_x ? items[a].q2 : items[a].q1) * fixed - items[a].t;
            const double ib = (along_x ? items[b].q2 : items[b].q1) * fixed - items[b].t;
            if (std::abs(sa - sb) < 1e-14) continue;
            const double s = (ib - ia) / (sa - sb);
            if (s > iv.lo && s < iv.hi) c.push_back(s);
        }
    }
    std::sort(c.begin(), c.end());
    const double eps = 1e-9 * iv.width();
    c.erase(std::unique(c.begin(), c.end(), [eps](double a, double b) { return std::abs(a - b) < eps; }), c.end());
    return c;
}

}  // namespace detail

/// Profile of the menu extension u(x, y) = max over items (null included)
/// along AB or AC of the rectangle.
inline EdgeProfile edge_profile_from_menu(const Menu& menu, Edge e, const Rect& rect, int samples = 65) {
    if (e != Edge::AB && e != Edge::AC) throw PreconditionError("edge profiles are defined on AB and AC");
    EdgeProfile p;
    p.edge = e;
    p.coords = detail::envelope_coords(menu.items(), e, rect, samples);
    for (double s : p.coords) {
        const double x = e == Edge::AB ? s : rect.x.lo;
        const double y = e == Edge::AB ? rect.y.lo : s;
        p.values.push_back(best_response(menu, x, y).utility);
    }
    return p;
}

struct ImprovementReport {
    double revenue_input = 0.0;       // boundary formula, menu extension of gm
    double revenue_supremum = 0.0;    // boundary formula, u*
    double min_dominance_margin = 0.0;  // min over grid of u* - u
    double max_dominance_gap = 0.0;     // max over grid of u* - u
    double edge_mismatch = 0.0;         // max |u* - u| on AB and AC nodes
    bool u_star_convex = true;
    bool improves = false;              // R(u*) >= R(u) - revenue_tol
    SupremumResult supremum;
};

/// Rebuilds u* from the edge profiles of gm's menu extension and compares
/// both utilities through the boundary revenue formula on one grid.
inline ImprovementReport verify_condition1_improvement(const GridMechanism& gm, const ProductDistribution& d,
                                                       int grid_n = 33, const QuadratureSpec& spec = {},
                                                       double revenue_tol = 1e-6, const ToleranceConfig& tol = {}) {
    const auto c1 = check_condition(d, 1, 64, tol);
    if (!c1.holds) {
        throw PreconditionError("verify_condition1_improvement requires Condition 1; worst margin " +
                                std::to_string(c1.worst_margin));
    }
    // LP solutions repeat items up to solver noise; merge those first.
    const auto items = detail::distinct_items(gm, 1e-9);
    const Menu menu(items, 0.0);
    const Rect rect = d.rect();
    const auto ab = edge_profile_from_menu(menu, Edge::AB, rect, grid_n);
    const auto ac = edge_profile_from_menu(menu, Edge::AC, rect, grid_n);

    ImprovementReport rep;
    rep.supremum = two_step_supremum(ab, ac, rect, grid_n, items, tol.abs_tol);
    const auto& star = rep.supremum.mechanism;
    const auto input = mechanism_from_menu(menu, star.xs, star.ys);

    rep.min_dominance_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < star.nx(); ++i)
        for (int j = 0; j < star.ny(); ++j) {
            const double diff = star.u(i, j) - input.u(i, j);
            rep.min_dominance_margin = std::min(rep.min_dominance_margin, diff);
            rep.max_dominance_gap = std::max(rep.max_dominance_gap, diff);
            if (i == 0 || j == 0) rep.edge_mismatch = std::max(rep.edge_mismatch, std::abs(diff));
        }
    try {
        (void)payment_from_utility(star.xs, star.ys, star.u, tol.abs_tol);
    } catch (const ValidationError&) {
        rep.u_star_convex = false;
    }
    rep.revenue_input = revenue_via_boundary_formula(input, d, spec);
    rep.revenue_supremum = revenue_via_boundary_formula(star, d, spec);
    rep.improves = rep.revenue_supremum >= rep.revenue_input - revenue_tol;
    return rep;
}

struct BundleConstruction {
    Menu menu;
    double price = 0.0;
    double revenue = 0.0;
};

/// For identical marginals with power rate at most -3/2 everywhere, the menu
/// {null, (1, 1, p*)} with p* maximizing p (1 - P(x + y <= p)).
inline BundleConstruction symmetric_bundle_construction(const ProductDistribution& d, int grid_n = 256,
                                                        double tol = 1e-9) {
    if (!d.is_iid()) throw PreconditionError("symmetric_bundle_construction requires identical marginals");
    double margin = std::numeric_limits<double>::infinity();
    double at = d.dx.lo();
    for (double x : linspace(d.dx.lo(), d.dx.hi(), grid_n)) {
        const double m = -1.5 - d.dx.power_rate(x);
        if (m < margin) {
            margin = m;
            at = x;
        }
    }
    if (margin < -tol) {
        std::ostringstream os;
        os << "symmetric_bundle_construction requires PR <= -3/2; margin " << margin << " at x = " << at;
        throw PreconditionError(os.str());
    }
    const double lo = d.dx.lo() + d.dy.lo();
    const double hi = d.dx.hi() + d.dy.hi();
    const double ends[] = {lo, hi};
    const auto best = maximize_scalar([&](double p) { return p * (1.0 - bundle_cdf(d, p)); }, lo, hi, ends);
    return {Menu{{1, 1, best.argmax}}, best.argmax, best.value};
}

}  // namespace menulab
