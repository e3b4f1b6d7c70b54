#pragma once

#include "menulab/distributions.hpp"
#include "menulab/errors.hpp"
#include "menulab/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace menulab {

/// Allocation probabilities for both items and a payment.
struct MenuItem {
    double q1 = 0.0;
    double q2 = 0.0;
    double t = 0.0;

    [[nodiscard]] double utility(double x, double y) const { return x * q1 + y * q2 - t; }
    [[nodiscard]] bool is_null(double tol = 0.0) const {
        return std::abs(q1) <= tol && std::abs(q2) <= tol && std::abs(t) <= tol;
    }
    bool operator==(const MenuItem&) const = default;
};

inline double linf_distance(const MenuItem& a, const MenuItem& b) {
    return std::max({std::abs(a.q1 - b.q1), std::abs(a.q2 - b.q2), std::abs(a.t - b.t)});
}

inline std::string to_string(const MenuItem& m) {
    std::ostringstream os;
    os.precision(12);
    os << "(" << m.q1 << ", " << m.q2 << ", " << m.t << ")";
    return os.str();
}

/// A mechanism in taxation-principle form. The null item (0,0,0) is always
/// present at index 0; items closer than `merge_tol` (L-inf) are merged,
/// keeping the first occurrence.
class Menu {
public:
    static constexpr double kInputSlack = 1e-9;

    Menu() : items_{MenuItem{}} {}

    explicit Menu(std::span<const MenuItem> items, double merge_tol = 1e-12) : items_{MenuItem{}} {
        for (MenuItem m : items) {
            if (!(std::isfinite(m.q1) && std::isfinite(m.q2) && std::isfinite(m.t))) {
                throw PreconditionError("menu item has a non-finite entry");
            }
            if (m.q1 < -kInputSlack || m.q1 > 1 + kInputSlack || m.q2 < -kInputSlack || m.q2 > 1 + kInputSlack ||
                m.t < -kInputSlack) {
                throw PreconditionError("menu item " + to_string(m) + " violates 0 <= q <= 1, t >= 0");
            }
            m.q1 = std::clamp(m.q1, 0.0, 1.0);
            m.q2 = std::clamp(m.q2, 0.0, 1.0);
            m.t = std::max(m.t, 0.0);
            add(m, merge_tol);
        }
    }

    Menu(std::initializer_list<MenuItem> items, double merge_tol = 1e-12)
        : Menu(std::span<const MenuItem>(items.begin(), items.size()), merge_tol) {}

    [[nodiscard]] const std::vector<MenuItem>& items() const { return items_; }
    [[nodiscard]] std::size_t size() const { return items_.size(); }
    [[nodiscard]] const MenuItem& operator[](std::size_t k) const { return items_[k]; }
    [[nodiscard]] std::size_t non_null_count() const { return items_.size() - 1; }

private:
    void add(const MenuItem& m, double tol) {
        for (const auto& e : items_) {
            if (linf_distance(e, m) <= tol) return;
        }
        items_.push_back(m);
    }

    std::vector<MenuItem> items_;
};

struct BestResponse {
    std::size_t index = 0;
    double utility = 0.0;
};

/// Utility-maximizing item; among items within `tol` of the maximum the one
/// with the highest payment is chosen.
inline BestResponse best_response(std::span<const MenuItem> items, double x, double y, double tol = 1e-9) {
    if (items.empty()) throw PreconditionError("best_response requires a nonempty menu");
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& m : items) top = std::max(top, m.utility(x, y));
    BestResponse br{items.size(), top};
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (items[k].utility(x, y) < top - tol) continue;
        if (br.index == items.size() || items[k].t > items[br.index].t) br.index = k;
    }
    br.utility = items[br.index].utility(x, y);
    return br;
}

inline BestResponse best_response(const Menu& m, double x, double y, double tol = 1e-9) {
    return best_response(std::span(m.items()), x, y, tol);
}

namespace geometry {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

using Polygon = std::vector<Point>;

/// Clips a convex polygon to { a x + b y >= c }.
inline Polygon clip(const Polygon& poly, double a, double b, double c) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        const double sp = a * p.x + b * p.y - c;
        const double sq = a * q.x + b * q.y - c;
        if (sp >= 0) out.push_back(p);
        if ((sp >= 0) != (sq >= 0)) {
            const double s = sp / (sp - sq);
            out.push_back({p.x + s * (q.x - p.x), p.y + s * (q.y - p.y)});
        }
    }
    return out.size() >= 3 ? out : Polygon{};
}

inline double area(const Polygon& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % poly.size()];
        s += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(s);
}

/// Collapsed-square Gauss–Legendre rule on a triangle, split into
/// `subdiv`^2 congruent pieces.
template <typename F>
double integrate_triangle(F& f, Point p0, Point p1, Point p2, int order, int subdiv) {
    const auto& rule = gauss_legendre(order);
    double total = 0.0;
    const double h = 1.0 / subdiv;
    auto map = [&](double u, double v) {
        return Point{p0.x + u * (p1.x - p0.x) + v * (p2.x - p0.x), p0.y + u * (p1.y - p0.y) + v * (p2.y - p0.y)};
    };
    auto piece = [&](Point a, Point b, Point c) {
        const double det = std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
        double s = 0.0;
        for (int i = 0; i < order; ++i) {
            const double r = 0.5 * (rule.nodes[i] + 1.0);
            for (int j = 0; j < order; ++j) {
                const double w = 0.5 * (rule.nodes[j] + 1.0);
                const double px = a.x + r * (1 - w) * (b.x - a.x) + r * w * (c.x - a.x);
                const double py = a.y + r * (1 - w) * (b.y - a.y) + r * w * (c.y - a.y);
                s += 0.25 * rule.weights[i] * rule.weights[j] * r * f(px, py);
            }
        }
        return s * det;
    };
    for (int i = 0; i < subdiv; ++i) {
        for (int j = 0; i + j < subdiv; ++j) {
            const double u = i * h;
            const double v = j * h;
            total += piece(map(u, v), map(u + h, v), map(u, v + h));
            if (i + j + 1 < subdiv) total += piece(map(u + h, v), map(u + h, v + h), map(u, v + h));
        }
    }
    return total;
}

template <typename F>
double integrate_polygon(F& f, const Polygon& poly, int order, int subdiv) {
    double total = 0.0;
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        total += integrate_triangle(f, poly[0], poly[k], poly[k + 1], order, subdiv);
    }
    return total;
}

}  // namespace geometry

/// Region of V where item k is chosen (highest payment wins ties; exact
/// duplicates keep the lowest index).
inline geometry::Polygon choice_region(std::span<const MenuItem> items, std::size_t k, const Rect& rect) {
    using geometry::Point;
    geometry::Polygon poly{Point{rect.x.lo, rect.y.lo}, Point{rect.x.hi, rect.y.lo}, Point{rect.x.hi, rect.y.hi},
                           Point{rect.x.lo, rect.y.hi}};
    const MenuItem& mk = items[k];
    for (std::size_t j = 0; j < items.size() && !poly.empty(); ++j) {
        if (j == k) continue;
        const MenuItem& mj = items[j];
        const double a = mk.q1 - mj.q1;
        const double b = mk.q2 - mj.q2;
        const double c = mk.t - mj.t;
        if (std::abs(a) <= 1e-14 && std::abs(b) <= 1e-14) {
            if (c > 0 || (c == 0 && j < k)) return {};
            continue;
        }
        poly = geometry::clip(poly, a, b, c);
    }
    return poly;
}

/// Expected payment of a menu under d: the density is integrated exactly over
/// each item's polygonal choice region, with triangle subdivision doubled
/// until successive estimates agree to rel_tol.
inline double menu_revenue(std::span<const MenuItem> items, const ProductDistribution& d,
                           const QuadratureSpec& spec = {}, const ToleranceConfig& tol = {}) {
    check(spec);
    const Rect rect = d.rect();
    std::vector<geometry::Polygon> regions;
    std::vector<double> pay;
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (items[k].t == 0.0) continue;
        auto poly = choice_region(items, k, rect);
        if (poly.empty()) continue;
        regions.push_back(std::move(poly));
        pay.push_back(items[k].t);
    }
    if (regions.empty()) return 0.0;
    auto f = [&](double x, double y) {
        const double v = d.pdf(x, y);
        if (!std::isfinite(v)) detail::throw_non_finite(x, y);
        return v;
    };
    auto estimate = [&](int subdiv) {
        double r = 0.0;
        for (std::size_t k = 0; k < regions.size(); ++k) {
            r += pay[k] * geometry::integrate_polygon(f, regions[k], spec.order, subdiv);
        }
        return r;
    };
    double prev = estimate(1);
    constexpr int kMaxDoublings = 4;
    for (int level = 1; level <= kMaxDoublings; ++level) {
        const double cur = estimate(1 << level);
        if (std::abs(cur - prev) <= tol.rel_tol * std::abs(cur) + tol.abs_tol) return cur;
        if (level == kMaxDoublings) {
            std::ostringstream os;
            os.precision(12);
            os << "menu_revenue did not converge after " << kMaxDoublings << " doublings: last estimates " << prev
               << " and " << cur;
            throw NumericsError(os.str());
        }
        prev = cur;
    }
    return prev;
}

inline double menu_revenue(const Menu& m, const ProductDistribution& d, const QuadratureSpec& spec = {},
                           const ToleranceConfig& tol = {}) {
    return menu_revenue(std::span(m.items()), d, spec, tol);
}

struct UnitDemandFlag {
    bool enabled = false;
};

/// Per-type allocation, payment and utility on a tensor grid; entry (i, j)
/// belongs to the type (xs[i], ys[j]). `mass` is optional.
struct GridMechanism {
    std::vector<double> xs;
    std::vector<double> ys;
    Eigen::MatrixXd q1;
    Eigen::MatrixXd q2;
    Eigen::MatrixXd t;
    Eigen::MatrixXd u;
    Eigen::MatrixXd mass;

    [[nodiscard]] int nx() const { return static_cast<int>(xs.size()); }
    [[nodiscard]] int ny() const { return static_cast<int>(ys.size()); }
    [[nodiscard]] bool has_mass() const { return mass.size() > 0; }
    [[nodiscard]] MenuItem item(int i, int j) const { return {q1(i, j), q2(i, j), t(i, j)}; }

    /// Sum of t * mass; requires masses.
    [[nodiscard]] double expected_payment() const {
        if (!has_mass()) throw PreconditionError("expected_payment requires type masses");
        return (t.array() * mass.array()).sum();
    }

    void check_shape() const {
        const auto n = static_cast<Eigen::Index>(xs.size());
        const auto m = static_cast<Eigen::Index>(ys.size());
        for (const auto* mat : {&q1, &q2, &t, &u}) {
            if (mat->rows() != n || mat->cols() != m) throw PreconditionError("GridMechanism: matrix shape mismatch");
        }
        if (has_mass() && (mass.rows() != n || mass.cols() != m)) {
            throw PreconditionError("GridMechanism: mass shape mismatch");
        }
        if (n == 0 || m == 0) throw PreconditionError("GridMechanism: empty grid");
        for (std::size_t k = 1; k < xs.size(); ++k)
            if (!(xs[k] > xs[k - 1])) throw PreconditionError("GridMechanism: xs not strictly increasing");
        for (std::size_t k = 1; k < ys.size(); ++k)
            if (!(ys[k] > ys[k - 1])) throw PreconditionError("GridMechanism: ys not strictly increasing");
    }
};

/// Every grid type picks its best response from `menu`.
inline GridMechanism mechanism_from_menu(std::span<const MenuItem> menu, std::vector<double> xs,
                                         std::vector<double> ys, double tol = 1e-9) {
    GridMechanism gm;
    gm.xs = std::move(xs);
    gm.ys = std::move(ys);
    const int n = gm.nx();
    const int m = gm.ny();
    gm.q1.resize(n, m);
    gm.q2.resize(n, m);
    gm.t.resize(n, m);
    gm.u.resize(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const auto br = best_response(menu, gm.xs[i], gm.ys[j], tol);
            const MenuItem& it = menu[br.index];
            gm.q1(i, j) = it.q1;
            gm.q2(i, j) = it.q2;
            gm.t(i, j) = it.t;
            gm.u(i, j) = br.utility;
        }
    }
    return gm;
}

inline GridMechanism mechanism_from_menu(const Menu& menu, std::vector<double> xs, std::vector<double> ys,
                                         double tol = 1e-9) {
    return mechanism_from_menu(std::span(menu.items()), std::move(xs), std::move(ys), tol);
}

struct Violation {
    double amount = 0.0;  // 0 when the category passes
    std::string where;
};

struct ValidationReport {
    double tol = 0.0;
    Violation ir;
    Violation ic;
    Violation consistency;
    Violation bounds;
    Violation unit_demand;
    bool unit_demand_checked = false;

    [[nodiscard]] bool ok() const {
        return ir.amount <= tol && ic.amount <= tol && consistency.amount <= tol && bounds.amount <= tol &&
               unit_demand.amount <= tol;
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(6);
        auto line = [&](const char* name, const Violation& v) {
            if (v.amount > tol) os << name << " violated by " << v.amount << " at " << v.where << "; ";
        };
        line("IR", ir);
        line("IC", ic);
        line("utility consistency", consistency);
        line("allocation bounds", bounds);
        line("unit demand", unit_demand);
        const std::string s = os.str();
        return s.empty() ? "valid" : s.substr(0, s.size() - 2);
    }
};

namespace detail {

inline std::string type_label(const GridMechanism& gm, int i, int j) {
    std::ostringstream os;
    os.precision(6);
    os << "type (" << gm.xs[i] << ", " << gm.ys[j] << ")";
    return os.str();
}

inline void worsen(Violation& v, double amount, const std::string& where) {
    if (amount > v.amount) {
        v.amount = amount;
        v.where = where;
    }
}

}  // namespace detail

/// Exhaustive pairwise IC, IR, utility consistency, allocation bounds and
/// (optionally) unit demand. Each category records its worst violation.
inline ValidationReport validate(const GridMechanism& gm, UnitDemandFlag unit_demand = {}, double tol = 1e-9) {
    gm.check_shape();
    ValidationReport rep;
    rep.tol = tol;
    rep.unit_demand_checked = unit_demand.enabled;
    const int n = gm.nx();
    const int m = gm.ny();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const auto here = [&] { return detail::type_label(gm, i, j); };
            if (!(std::isfinite(gm.q1(i, j)) && std::isfinite(gm.q2(i, j)) && std::isfinite(gm.t(i, j)) &&
                  std::isfinite(gm.u(i, j)))) {
                detail::worsen(rep.bounds, std::numeric_limits<double>::infinity(), here() + " (non-finite entry)");
                continue;
            }
            if (-gm.u(i, j) > tol) detail::worsen(rep.ir, -gm.u(i, j), here());
            const double own = gm.item(i, j).utility(gm.xs[i], gm.ys[j]);
            if (std::abs(own - gm.u(i, j)) > tol) detail::worsen(rep.consistency, std::abs(own - gm.u(i, j)), here());
            const double b = std::max({-gm.q1(i, j), gm.q1(i, j) - 1.0, -gm.q2(i, j), gm.q2(i, j) - 1.0});
            if (b > tol) detail::worsen(rep.bounds, b, here());
            if (unit_demand.enabled) {
                const double s = gm.q1(i, j) + gm.q2(i, j) - 1.0;
                if (s > tol) detail::worsen(rep.unit_demand, s, here());
            }
        }
    }
    // IC: type (i,j) must not prefer the item of any other type.
    const Eigen::Index total = static_cast<Eigen::Index>(n) * m;
    for (Eigen::Index a = 0; a < total; ++a) {
        const int i = static_cast<int>(a / m);
        const int j = static_cast<int>(a % m);
        const double x = gm.xs[i];
        const double y = gm.ys[j];
        const double ua = gm.u(i, j);
        double worst = 0.0;
        Eigen::Index worst_b = -1;
        for (Eigen::Index b = 0; b < total; ++b) {
            const int k = static_cast<int>(b / m);
            const int l = static_cast<int>(b % m);
            const double gain = x * gm.q1(k, l) + y * gm.q2(k, l) - gm.t(k, l) - ua;
            if (gain > worst) {
                worst = gain;
                worst_b = b;
            }
        }
        if (worst > tol && worst > rep.ic.amount) {
            const int k = static_cast<int>(worst_b / m);
            const int l = static_cast<int>(worst_b % m);
            detail::worsen(rep.ic, worst, detail::type_label(gm, i, j) + " mimicking " + detail::type_label(gm, k, l));
        }
    }
    return rep;
}

/// t = x u_x + y u_y - u with forward differences (backward on the last
/// row/column). Throws if u is not discretely convex along grid lines.
inline Eigen::MatrixXd payment_from_utility(const std::vector<double>& xs, const std::vector<double>& ys,
                                            const Eigen::MatrixXd& u, double tol = 1e-9) {
    const int n = static_cast<int>(xs.size());
    const int m = static_cast<int>(ys.size());
    if (u.rows() != n || u.cols() != m || n < 2 || m < 2) {
        throw PreconditionError("payment_from_utility requires a utility field of at least 2x2 matching the grid");
    }
    auto slope_x = [&](int i, int j) { return (u(i + 1, j) - u(i, j)) / (xs[i + 1] - xs[i]); };
    auto slope_y = [&](int i, int j) { return (u(i, j + 1) - u(i, j)) / (ys[j + 1] - ys[j]); };
    auto fail = [](const char* axis, double a, double b, double c, double fixed) {
        std::ostringstream os;
        os.precision(6);
        os << "utility is not convex along " << axis << " through (" << a << ", " << b << ", " << c << ") at "
           << (axis[0] == 'x' ? "y = " : "x = ") << fixed;
        throw ValidationError(os.str());
    };
    for (int j = 0; j < m; ++j)
        for (int i = 1; i + 1 < n; ++i)
            if (slope_x(i, j) < slope_x(i - 1, j) - tol) fail("x", xs[i - 1], xs[i], xs[i + 1], ys[j]);
    for (int i = 0; i < n; ++i)
        for (int j = 1; j + 1 < m; ++j)
            if (slope_y(i, j) < slope_y(i, j - 1) - tol) fail("y", ys[j - 1], ys[j], ys[j + 1], xs[i]);

    Eigen::MatrixXd t(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double ux = slope_x(std::min(i, n - 2), j);
            const double uy = slope_y(i, std::min(j, m - 2));
            t(i, j) = xs[i] * ux + ys[j] * uy - u(i, j);
        }
    }
    return t;
}

/// Bilinear interpolant of nodal values; beyond the outermost nodes the edge
/// cells are extended linearly.
class BilinearField {
public:
    BilinearField(const std::vector<double>& xs, const std::vector<double>& ys, const Eigen::MatrixXd& v)
        : xs_(xs), ys_(ys), v_(v) {
        if (xs.size() < 2 || ys.size() < 2) throw PreconditionError("bilinear interpolation needs a 2x2 grid");
    }

    [[nodiscard]] double operator()(double x, double y) const {
        const auto [i, s] = locate(xs_, x);
        const auto [j, r] = locate(ys_, y);
        return (1 - s) * (1 - r) * v_(i, j) + s * (1 - r) * v_(i + 1, j) + (1 - s) * r * v_(i, j + 1) +
               s * r * v_(i + 1, j + 1);
    }

private:
    static std::pair<int, double> locate(const std::vector<double>& g, double x) {
        const auto it = std::upper_bound(g.begin(), g.end(), x);
        int k = static_cast<int>(it - g.begin()) - 1;
        k = std::clamp(k, 0, static_cast<int>(g.size()) - 2);
        return {k, (x - g[k]) / (g[k + 1] - g[k])};
    }

    const std::vector<double>& xs_;
    const std::vector<double>& ys_;
    const Eigen::MatrixXd& v_;
};

namespace detail {

// Support endpoints merged with the grid nodes strictly inside them.
inline std::vector<double> breakpoints(const std::vector<double>& nodes, Interval support) {
    std::vector<double> b{support.lo};
    for (double v : nodes)
        if (v > support.lo && v < support.hi) b.push_back(v);
    b.push_back(support.hi);
    return b;
}

}  // namespace detail

/// The five boundary terms (BD, CD, AC, AB edges and the interior u * delta
/// term) evaluated for the bilinear interpolant of gm.u.
struct BoundaryTerms {
    double bd = 0.0;
    double cd = 0.0;
    double ac = 0.0;
    double ab = 0.0;
    double interior = 0.0;

    [[nodiscard]] double total() const { return bd + cd - ac - ab - interior; }
};

inline BoundaryTerms boundary_terms(const GridMechanism& gm, const ProductDistribution& d,
                                    const QuadratureSpec& spec = {}) {
    gm.check_shape();
    const BilinearField u(gm.xs, gm.ys, gm.u);
    const double xa = d.dx.lo();
    const double xb = d.dx.hi();
    const double ya = d.dy.lo();
    const double yc = d.dy.hi();
    const auto bx = detail::breakpoints(gm.xs, d.dx.support());
    const auto by = detail::breakpoints(gm.ys, d.dy.support());
    const QuadratureSpec cell{spec.order, 1};

    auto edge_y = [&](double x0) {
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < by.size(); ++k)
            s += integrate_1d([&](double y) { return u(x0, y) * d.dy.pdf(y); }, by[k], by[k + 1], cell);
        return x0 * d.dx.pdf(x0) * s;
    };
    auto edge_x = [&](double y0) {
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < bx.size(); ++k)
            s += integrate_1d([&](double x) { return u(x, y0) * d.dx.pdf(x); }, bx[k], bx[k + 1], cell);
        return y0 * d.dy.pdf(y0) * s;
    };
    BoundaryTerms bt;
    bt.bd = edge_y(xb);
    bt.cd = edge_x(yc);
    bt.ac = edge_y(xa);
    bt.ab = edge_x(ya);
    for (std::size_t a = 0; a + 1 < bx.size(); ++a) {
        for (std::size_t b = 0; b + 1 < by.size(); ++b) {
            bt.interior += integrate_2d([&](double x, double y) { return u(x, y) * delta(d, x, y); },
                                        Rect{{bx[a], bx[a + 1]}, {by[b], by[b + 1]}}, cell);
        }
    }
    return bt;
}

/// Revenue through the boundary decomposition; the mechanism is validated
/// first and any violation is raised as a ValidationError.
inline double revenue_via_boundary_formula(const GridMechanism& gm, const ProductDistribution& d,
                                           const QuadratureSpec& spec = {}, double validation_tol = 1e-8) {
    const auto rep = validate(gm, {}, validation_tol);
    if (!rep.ok()) throw ValidationError("revenue_via_boundary_formula: " + rep.describe());
    return boundary_terms(gm, d, spec).total();
}

}  // namespace menulab
