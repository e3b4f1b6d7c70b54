#pragma once

#include "menulab/errors.hpp"
#include "menulab/mechanism.hpp"
#include "menulab/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace menulab {

struct MenuCluster {
    MenuItem representative;
    double mass = 0.0;
    int members = 0;
};

/// Greedy L-inf clustering of the per-type triples. Each cluster is seeded by
/// its first member in row-major order; its representative is the
/// mass-weighted mean (uniform weights without masses). Clusters are returned
/// sorted by payment.
inline std::vector<MenuCluster> cluster_menu(const GridMechanism& gm, double tol) {
    gm.check_shape();
    std::vector<MenuItem> seeds;
    std::vector<MenuCluster> acc;
    std::vector<double> weight;
    for (int i = 0; i < gm.nx(); ++i) {
        for (int j = 0; j < gm.ny(); ++j) {
            const MenuItem it = gm.item(i, j);
            const double w = gm.has_mass() ? gm.mass(i, j) : 1.0;
            std::size_t k = 0;
            while (k < seeds.size() && linf_distance(seeds[k], it) > tol) ++k;
            if (k == seeds.size()) {
                seeds.push_back(it);
                acc.push_back({});
                weight.push_back(0.0);
            }
            auto& c = acc[k];
            c.representative.q1 += w * it.q1;
            c.representative.q2 += w * it.q2;
            c.representative.t += w * it.t;
            c.mass += w;
            ++c.members;
            weight[k] += w;
        }
    }
    for (std::size_t k = 0; k < acc.size(); ++k) {
        auto& r = acc[k].representative;
        if (weight[k] > 0) {
            r.q1 /= weight[k];
            r.q2 /= weight[k];
            r.t /= weight[k];
        } else {
            r = seeds[k];
        }
        r.q1 = std::clamp(r.q1, 0.0, 1.0);
        r.q2 = std::clamp(r.q2, 0.0, 1.0);
        r.t = std::max(r.t, 0.0);
        if (linf_distance(r, MenuItem{}) <= tol) r = MenuItem{};
    }
    std::stable_sort(acc.begin(), acc.end(),
                     [](const MenuCluster& a, const MenuCluster& b) { return a.representative.t < b.representative.t; });
    return acc;
}

/// Menu of cluster representatives; the null item is appended if absent.
inline Menu extract_menu(const GridMechanism& gm, double tol = ToleranceConfig{}.clustering_tol) {
    std::vector<MenuItem> items;
    for (const auto& c : cluster_menu(gm, tol)) items.push_back(c.representative);
    return Menu(items, 0.0);
}

struct MenuCount {
    std::size_t raw = 0;        // distinct triples at 1e-9, null included
    std::size_t clustered = 0;  // |extract_menu(gm, tol)|, null included

    [[nodiscard]] std::size_t raw_non_null() const { return raw - 1; }
    [[nodiscard]] std::size_t clustered_non_null() const { return clustered - 1; }
};

inline MenuCount count_menu_items(const GridMechanism& gm, double tol = ToleranceConfig{}.clustering_tol) {
    return {extract_menu(gm, 1e-9).size(), extract_menu(gm, tol).size()};
}

struct MonotonicityReport {
    bool monotone = true;
    /// First violating adjacent pair, as indices into the input menu.
    std::optional<std::pair<std::size_t, std::size_t>> witness;
    std::string reason;
};

/// Orders items by payment (payments within `t_tol` form one level) and checks
/// that both allocation probabilities weakly increase from level to level.
/// Distinct allocations sharing one payment level also count as a violation,
/// since payments must then be strictly increasing.
inline MonotonicityReport check_menu_monotonicity(std::span<const MenuItem> items, double t_tol = 1e-9,
                                                  double q_tol = 1e-9) {
    MonotonicityReport rep;
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return items[a].t < items[b].t; });
    auto fail = [&](std::size_t a, std::size_t b, std::string why) {
        rep.monotone = false;
        rep.witness = std::pair{a, b};
        rep.reason = std::move(why);
        return rep;
    };
    std::size_t level_start = 0;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const MenuItem& prev = items[order[k - 1]];
        const MenuItem& cur = items[order[k]];
        const bool same_level = cur.t - items[order[level_start]].t <= t_tol;
        if (same_level) {
            if (std::abs(cur.q1 - prev.q1) > q_tol || std::abs(cur.q2 - prev.q2) > q_tol) {
                return fail(order[k - 1], order[k], "distinct allocations at the same payment");
            }
            continue;
        }
        level_start = k;
        if (cur.q1 < prev.q1 - q_tol) return fail(order[k - 1], order[k], "q1 decreases");
        if (cur.q2 < prev.q2 - q_tol) return fail(order[k - 1], order[k], "q2 decreases");
    }
    return rep;
}

inline MonotonicityReport check_menu_monotonicity(const Menu& m, double t_tol = 1e-9, double q_tol = 1e-9) {
    return check_menu_monotonicity(std::span(m.items()), t_tol, q_tol);
}

enum class RegionLabel { zero, vert, horz, full, other };

inline std::string_view to_string(RegionLabel l) {
    switch (l) {
        case RegionLabel::zero: return "ZERO";
        case RegionLabel::vert: return "VERT";
        case RegionLabel::horz: return "HORZ";
        case RegionLabel::full: return "FULL";
        case RegionLabel::other: return "OTHER";
    }
    return "?";
}

struct RegionReport {
    std::vector<std::vector<RegionLabel>> labels;  // labels[i][j]
    int zero_count = 0;
    int vert_count = 0;
    int horz_count = 0;
    int full_count = 0;
    int other_count = 0;
    bool zero_lower_left = true;
    bool zero_convex = true;
    bool full_upward_closed = true;
    bool vert_columns_consistent = true;  // each column's (*,1) types share q1
    bool horz_rows_consistent = true;     // each row's (1,*) types share q2
    bool vert_full_boundary_vertical = true;
    bool horz_full_boundary_horizontal = true;
    bool interface_monotone = true;  // no (1,*) type upper-left of a (*,1) type
    bool full_touches_zero = false;
    std::vector<std::string> notes;

    [[nodiscard]] bool geometry_ok() const {
        return zero_lower_left && zero_convex && full_upward_closed && vert_columns_consistent &&
               horz_rows_consistent && vert_full_boundary_vertical && horz_full_boundary_horizontal &&
               interface_monotone;
    }
};

/// Labels every type by its allocation and checks the discrete signatures of
/// the four-region picture: lower-left convex zero region, upward-closed
/// (1,1) region, vertical (*,1) slices and horizontal (1,*) slices separated
/// by straight boundaries from the (1,1) region, and an interface between the
/// two slice families running up and to the right.
inline RegionReport classify_regions(const GridMechanism& gm, double tol = ToleranceConfig{}.clustering_tol) {
    gm.check_shape();
    const int n = gm.nx();
    const int m = gm.ny();
    RegionReport r;
    r.labels.assign(n, std::vector<RegionLabel>(m, RegionLabel::other));
    auto near = [&](double v, double target) { return std::abs(v - target) <= tol; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double a = gm.q1(i, j);
            const double b = gm.q2(i, j);
            RegionLabel l = RegionLabel::other;
            if (near(a, 1) && near(b, 1)) l = RegionLabel::full;
            else if (near(a, 0) && near(b, 0)) l = RegionLabel::zero;
            else if (near(b, 1)) l = RegionLabel::vert;
            else if (near(a, 1)) l = RegionLabel::horz;
            r.labels[i][j] = l;
            switch (l) {
                case RegionLabel::zero: ++r.zero_count; break;
                case RegionLabel::vert: ++r.vert_count; break;
                case RegionLabel::horz: ++r.horz_count; break;
                case RegionLabel::full: ++r.full_count; break;
                case RegionLabel::other: ++r.other_count; break;
            }
        }
    }
    const auto& L = r.labels;
    auto is = [&](int i, int j, RegionLabel l) { return L[i][j] == l; };
    auto note = [&](bool& flag, std::string msg) {
        if (flag) r.notes.push_back(std::move(msg));
        flag = false;
    };

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            if (is(i, j, RegionLabel::zero)) {
                if ((i > 0 && !is(i - 1, j, RegionLabel::zero)) || (j > 0 && !is(i, j - 1, RegionLabel::zero))) {
                    note(r.zero_lower_left, "zero region not closed toward the lower-left corner");
                }
            }
            if (is(i, j, RegionLabel::full)) {
                if ((i + 1 < n && !is(i + 1, j, RegionLabel::full)) || (j + 1 < m && !is(i, j + 1, RegionLabel::full))) {
                    note(r.full_upward_closed, "(1,1) region not upward-closed");
                }
                const int di[] = {-1, 1, 0, 0};
                const int dj[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int a = i + di[k];
                    const int b = j + dj[k];
                    if (a >= 0 && a < n && b >= 0 && b < m && is(a, b, RegionLabel::zero)) r.full_touches_zero = true;
                }
            }
        }
    }

    // Midpoint convexity of the zero region, rounding to nearby nodes.
    std::vector<std::pair<int, int>> zeros;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (is(i, j, RegionLabel::zero)) zeros.emplace_back(i, j);
    for (std::size_t a = 0; a < zeros.size() && r.zero_convex; ++a) {
        for (std::size_t b = a + 1; b < zeros.size(); ++b) {
            const int si = zeros[a].first + zeros[b].first;
            const int sj = zeros[a].second + zeros[b].second;
            bool any = false;
            for (int ci : {si / 2, (si + 1) / 2})
                for (int cj : {sj / 2, (sj + 1) / 2}) any = any || is(ci, cj, RegionLabel::zero);
            if (!any) {
                note(r.zero_convex, "zero region fails the midpoint convexity test");
                break;
            }
        }
    }

    for (int i = 0; i < n; ++i) {
        double lo = 2, hi = -1;
        for (int j = 0; j < m; ++j)
            if (is(i, j, RegionLabel::vert)) {
                lo = std::min(lo, gm.q1(i, j));
                hi = std::max(hi, gm.q1(i, j));
            }
        if (hi - lo > tol) note(r.vert_columns_consistent, "(*,1) types of one column disagree on q1");
    }
    for (int j = 0; j < m; ++j) {
        double lo = 2, hi = -1;
        for (int i = 0; i < n; ++i)
            if (is(i, j, RegionLabel::horz)) {
                lo = std::min(lo, gm.q2(i, j));
                hi = std::max(hi, gm.q2(i, j));
            }
        if (hi - lo > tol) note(r.horz_rows_consistent, "(1,*) types of one row disagree on q2");
    }

    std::optional<int> vf;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i + 1 < n; ++i)
            if (is(i, j, RegionLabel::vert) && is(i + 1, j, RegionLabel::full)) {
                if (vf && *vf != i) note(r.vert_full_boundary_vertical, "(*,1)/(1,1) boundary is not vertical");
                vf = i;
            }
    std::optional<int> hf;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j + 1 < m; ++j)
            if (is(i, j, RegionLabel::horz) && is(i, j + 1, RegionLabel::full)) {
                if (hf && *hf != j) note(r.horz_full_boundary_horizontal, "(1,*)/(1,1) boundary is not horizontal");
                hf = j;
            }

    for (int i = 0; i < n && r.interface_monotone; ++i)
        for (int j = 0; j < m && r.interface_monotone; ++j) {
            if (!is(i, j, RegionLabel::horz)) continue;
            for (int k = i; k < n; ++k)
                for (int l = 0; l <= j; ++l)
                    if (is(k, l, RegionLabel::vert)) {
                        note(r.interface_monotone, "(1,*) type lies upper-left of a (*,1) type");
                        k = n;
                        break;
                    }
        }
    return r;
}

/// Breakpoints (endpoints included) and one slope per linear piece.
struct SegmentDecomposition {
    std::vector<double> breakpoints;
    std::vector<double> slopes;

    [[nodiscard]] std::size_t segments() const { return slopes.size(); }
    [[nodiscard]] bool convex(double slope_tol) const {
        for (std::size_t k = 1; k < slopes.size(); ++k)
            if (slopes[k] < slopes[k - 1] - slope_tol) return false;
        return true;
    }
    [[nodiscard]] bool slopes_in_unit_interval(double slope_tol) const {
        for (double s : slopes)
            if (s < -slope_tol || s > 1 + slope_tol) return false;
        return true;
    }
};

/// Splits sampled values into linear pieces: a piece ends when a successive
/// difference quotient departs from the piece's slope by more than
/// `slope_tol`. A lone cell whose chord slope lies between two longer
/// neighbouring pieces straddles a kink between grid nodes; it is absorbed and
/// the breakpoint placed where the neighbouring lines meet.
inline SegmentDecomposition piecewise_linear_segments(std::span<const double> values, std::span<const double> grid,
                                                      double slope_tol = ToleranceConfig{}.slope_tol) {
    if (values.size() != grid.size() || values.size() < 3) {
        throw PreconditionError("piecewise_linear_segments requires at least 3 matching points");
    }
    const std::size_t cells = values.size() - 1;
    std::vector<double> s(cells);
    for (std::size_t k = 0; k < cells; ++k) s[k] = (values[k + 1] - values[k]) / (grid[k + 1] - grid[k]);

    struct Run {
        std::size_t first;
        std::size_t last;  // cells, inclusive
        double slope;
    };
    std::vector<Run> runs;
    for (std::size_t k = 0; k < cells; ++k) {
        if (!runs.empty() && std::abs(s[k] - runs.back().slope) <= slope_tol) {
            auto& r = runs.back();
            r.last = k;
            r.slope = (values[k + 1] - values[r.first]) / (grid[k + 1] - grid[r.first]);
        } else {
            runs.push_back({k, k, s[k]});
        }
    }

    SegmentDecomposition out;
    out.breakpoints.push_back(grid.front());
    std::vector<Run> kept;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const bool lone = runs[r].first == runs[r].last;
        if (lone && r > 0 && r + 1 < runs.size() && runs[r - 1].last > runs[r - 1].first &&
            runs[r + 1].last > runs[r + 1].first) {
            const double a = runs[r - 1].slope;
            const double b = runs[r + 1].slope;
            const double c = runs[r].slope;
            if ((c - a) * (b - c) > 0) continue;  // absorbed as a kink
        }
        kept.push_back(runs[r]);
    }
    for (std::size_t r = 0; r < kept.size(); ++r) {
        out.slopes.push_back(kept[r].slope);
        if (r + 1 == kept.size()) break;
        const Run& L = kept[r];
        const Run& R = kept[r + 1];
        double bp = grid[R.first];
        if (R.first > L.last + 1 && std::abs(R.slope - L.slope) > 0) {
            // lines through the two pieces' end nodes
            const double xl = grid[L.last + 1];
            const double yl = values[L.last + 1];
            const double xr = grid[R.first];
            const double yr = values[R.first];
            bp = (yr - yl + L.slope * xl - R.slope * xr) / (L.slope - R.slope);
            bp = std::clamp(bp, xl, xr);
        }
        out.breakpoints.push_back(bp);
    }
    out.breakpoints.push_back(grid.back());
    return out;
}

enum class Edge { AB, AC, BD, CD };

inline std::string_view to_string(Edge e) {
    switch (e) {
        case Edge::AB: return "AB";
        case Edge::AC: return "AC";
        case Edge::BD: return "BD";
        case Edge::CD: return "CD";
    }
    return "?";
}

/// Utilities along the outermost grid line next to an edge of V, with the
/// coordinate that varies along it. AB: y = yA (bottom), AC: x = xA (left),
/// BD: x = xB (right), CD: y = yC (top).
inline std::pair<std::vector<double>, std::vector<double>> edge_values(const GridMechanism& gm, Edge e) {
    std::vector<double> v;
    switch (e) {
        case Edge::AB:
            for (int i = 0; i < gm.nx(); ++i) v.push_back(gm.u(i, 0));
            return {v, gm.xs};
        case Edge::CD:
            for (int i = 0; i < gm.nx(); ++i) v.push_back(gm.u(i, gm.ny() - 1));
            return {v, gm.xs};
        case Edge::AC:
            for (int j = 0; j < gm.ny(); ++j) v.push_back(gm.u(0, j));
            return {v, gm.ys};
        case Edge::BD:
            for (int j = 0; j < gm.ny(); ++j) v.push_back(gm.u(gm.nx() - 1, j));
            return {v, gm.ys};
    }
    return {};
}

inline SegmentDecomposition edge_segments(const GridMechanism& gm, Edge e,
                                          double slope_tol = ToleranceConfig{}.slope_tol) {
    const auto [v, g] = edge_values(gm, e);
    return piecewise_linear_segments(v, g, slope_tol);
}

}  // namespace menulab
