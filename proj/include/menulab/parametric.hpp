#pragma once

#include "menulab/baselines.hpp"
#include "menulab/distributions.hpp"
#include "menulab/errors.hpp"
#include "menulab/lp/instance.hpp"
#include "menulab/mechanism.hpp"
#include "menulab/numerics.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace menulab {

enum class FamilyId { four_item, three_item, six_item_symmetric, unit_demand_five, bundle };

inline std::string_view to_string(FamilyId f) {
    switch (f) {
        case FamilyId::four_item: return "four_item";
        case FamilyId::three_item: return "three_item";
        case FamilyId::six_item_symmetric: return "six_item_symmetric";
        case FamilyId::unit_demand_five: return "unit_demand_five";
        case FamilyId::bundle: return "bundle";
    }
    return "?";
}

inline std::optional<FamilyId> parse_family(std::string_view s) {
    for (auto f : {FamilyId::four_item, FamilyId::three_item, FamilyId::six_item_symmetric, FamilyId::unit_demand_five,
                   FamilyId::bundle})
        if (to_string(f) == s) return f;
    return std::nullopt;
}

/// A small parameterized menu: named components with box bounds.
///
///   four_item            alpha, beta, t_alpha, t_beta, t_1
///                        (1, alpha, t_alpha), (beta, 1, t_beta), (1, 1, t_1)
///   three_item           alpha, t_alpha, t_1
///                        (1, alpha, t_alpha), (1, 1, t_1)
///   six_item_symmetric   alpha_1, alpha_2, t_1, t_2, t_3
///                        (1, a1, t1), (1, a2, t2), (a1, 1, t1), (a2, 1, t2), (1, 1, t3)
///   unit_demand_five     alpha, beta, t_1, t_alpha, t_2, t_beta
///                        (1, 0, t1), (1 - alpha, alpha, ta), (0, 1, t2), (beta, 1 - beta, tb)
///   bundle               t
///
/// The null item is always added. Payments live in [0, xB + yC].
struct MenuFamily {
    FamilyId id = FamilyId::four_item;
    std::vector<std::string> names;
    std::vector<Interval> bounds;

    [[nodiscard]] std::size_t dim() const { return names.size(); }
    [[nodiscard]] bool is_payment(std::size_t k) const { return names[k].front() == 't'; }
};

inline MenuFamily make_family(FamilyId id, const Rect& rect) {
    const Interval pay{0.0, rect.x.hi + rect.y.hi};
    const Interval unit{0.0, 1.0};
    MenuFamily f;
    f.id = id;
    auto add = [&](std::string n, Interval b) {
        f.names.push_back(std::move(n));
        f.bounds.push_back(b);
    };
    switch (id) {
        case FamilyId::four_item:
            add("alpha", unit), add("beta", unit), add("t_alpha", pay), add("t_beta", pay), add("t_1", pay);
            break;
        case FamilyId::three_item:
            add("alpha", unit), add("t_alpha", pay), add("t_1", pay);
            break;
        case FamilyId::six_item_symmetric:
            add("alpha_1", unit), add("alpha_2", unit), add("t_1", pay), add("t_2", pay), add("t_3", pay);
            break;
        case FamilyId::unit_demand_five:
            add("alpha", unit), add("beta", unit), add("t_1", pay), add("t_alpha", pay), add("t_2", pay);
            add("t_beta", pay);
            break;
        case FamilyId::bundle:
            add("t", pay);
            break;
    }
    return f;
}

struct Instantiation {
    Menu menu;
    std::vector<double> params;  // after clamping
    std::vector<MenuItem> items;  // non-null items before merging
    std::vector<std::size_t> payment_param;  // parameter index holding items[k].t
    bool clamped = false;
};

/// Builds the family's menu. Out-of-box values and violated payment orderings
/// (the full bundle never cheaper than a partial item) are clamped and flagged.
inline Instantiation instantiate(const MenuFamily& fam, std::span<const double> params) {
    if (params.size() != fam.dim()) {
        throw PreconditionError("instantiate: " + std::string(to_string(fam.id)) + " expects " +
                                std::to_string(fam.dim()) + " parameters, got " + std::to_string(params.size()));
    }
    Instantiation out;
    out.params.assign(params.begin(), params.end());
    auto& p = out.params;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double c = std::clamp(p[k], fam.bounds[k].lo, fam.bounds[k].hi);
        if (c != p[k] || !std::isfinite(p[k])) out.clamped = true;
        p[k] = std::isfinite(p[k]) ? c : fam.bounds[k].lo;
    }
    auto at_least = [&](std::size_t k, double floor) {
        if (p[k] < floor) {
            p[k] = floor;
            out.clamped = true;
        }
    };
    auto& items = out.items;
    auto& pay = out.payment_param;
    switch (fam.id) {
        case FamilyId::four_item:
            at_least(4, std::max(p[2], p[3]));
            items = {{1, p[0], p[2]}, {p[1], 1, p[3]}, {1, 1, p[4]}};
            pay = {2, 3, 4};
            break;
        case FamilyId::three_item:
            at_least(2, p[1]);
            items = {{1, p[0], p[1]}, {1, 1, p[2]}};
            pay = {1, 2};
            break;
        case FamilyId::six_item_symmetric:
            at_least(4, std::max(p[2], p[3]));
            items = {{1, p[0], p[2]}, {1, p[1], p[3]}, {p[0], 1, p[2]}, {p[1], 1, p[3]}, {1, 1, p[4]}};
            pay = {2, 3, 2, 3, 4};
            break;
        case FamilyId::unit_demand_five:
            items = {{1, 0, p[2]}, {1 - p[0], p[0], p[3]}, {0, 1, p[4]}, {p[1], 1 - p[1], p[5]}};
            pay = {2, 3, 4, 5};
            break;
        case FamilyId::bundle:
            items = {{1, 1, p[0]}};
            pay = {0};
            break;
    }
    out.menu = Menu(items);
    return out;
}

struct FamilyFit {
    FamilyId family = FamilyId::four_item;
    std::vector<double> params;
    double revenue = 0.0;
    Menu menu;
    int evaluations = 0;
};

namespace detail {

// Starting points in the unit cube: family-specific informed guesses built
// from the posted-price baselines, then a stratified (Latin-hypercube style)
// set from a fixed-seed generator.
inline std::vector<Vector> family_starts(const MenuFamily& fam, const ProductDistribution& d, int restarts) {
    const double p1 = myerson_price(d.dx).price;
    const double p2 = myerson_price(d.dy).price;
    const double pb = bundle_sale(d).price;
    std::vector<std::vector<double>> guesses;
    switch (fam.id) {
        case FamilyId::four_item:
            guesses = {{0, 0, p1, p2, std::min(p1 + p2, 0.9 * (p1 + p2) + 0.1 * pb)}, {1, 1, pb, pb, pb}};
            break;
        case FamilyId::three_item:
            guesses = {{0, p1, pb}, {1, pb, pb}};
            break;
        case FamilyId::six_item_symmetric:
            guesses = {{0, 0, p1, p1, 0.9 * (p1 + p2) + 0.1 * pb}, {1, 1, pb, pb, pb}};
            break;
        case FamilyId::unit_demand_five:
            guesses = {{0.5, 0.5, p1, 0.5 * (p1 + p2), p2, 0.5 * (p1 + p2)}, {0, 1, p1, p2, p2, p1}};
            break;
        case FamilyId::bundle:
            guesses = {{pb}};
            break;
    }
    std::vector<Vector> starts;
    auto to_unit = [&](const std::vector<double>& g) {
        Vector z(fam.dim());
        for (std::size_t k = 0; k < fam.dim(); ++k) {
            const auto& b = fam.bounds[k];
            z[k] = std::clamp((g[k] - b.lo) / (b.hi - b.lo), 0.0, 1.0);
        }
        return z;
    };
    for (const auto& g : guesses) starts.push_back(to_unit(g));

    std::mt19937_64 rng(0x6c68732dULL);
    std::vector<std::vector<int>> perm(fam.dim(), std::vector<int>(restarts));
    for (auto& pk : perm) {
        std::iota(pk.begin(), pk.end(), 0);
        std::shuffle(pk.begin(), pk.end(), rng);
    }
    for (int r = 0; r < restarts; ++r) {
        Vector z(fam.dim());
        for (std::size_t k = 0; k < fam.dim(); ++k) z[k] = (perm[k][r] + 0.5) / restarts;
        starts.push_back(std::move(z));
    }
    return starts;
}

inline std::vector<double> from_unit(const MenuFamily& fam, const Vector& z) {
    std::vector<double> p(fam.dim());
    for (std::size_t k = 0; k < fam.dim(); ++k) {
        const auto& b = fam.bounds[k];
        p[k] = b.lo + std::clamp(z[k], 0.0, 1.0) * (b.hi - b.lo);
    }
    return p;
}

}  // namespace detail

/// Multi-start Nelder-Mead on the continuous expected revenue of the family.
/// `extra_starts` (in parameter units) are tried before the built-in seeds.
inline FamilyFit optimize_family(const MenuFamily& fam, const ProductDistribution& d, int restarts = 8,
                                 std::span<const std::vector<double>> extra_starts = {},
                                 const NelderMeadOptions& opt = {0.1, 3000, 1e-9}) {
    if (restarts < 8) throw PreconditionError("optimize_family requires restarts >= 8");
    if (fam.id == FamilyId::six_item_symmetric && !d.is_iid()) {
        throw PreconditionError("six_item_symmetric requires identical marginals");
    }
    auto objective = [&](const Vector& z) { return menu_revenue(instantiate(fam, detail::from_unit(fam, z)).menu, d); };
    std::vector<Vector> starts;
    for (const auto& e : extra_starts) {
        Vector z(fam.dim());
        for (std::size_t k = 0; k < fam.dim(); ++k) {
            const auto& b = fam.bounds[k];
            z[k] = std::clamp((e.at(k) - b.lo) / (b.hi - b.lo), 0.0, 1.0);
        }
        starts.push_back(std::move(z));
    }
    for (auto& s : detail::family_starts(fam, d, restarts)) starts.push_back(std::move(s));
    const auto res = nelder_mead(objective, std::span<const Vector>(starts), opt);
    FamilyFit fit;
    fit.family = fam.id;
    const auto inst = instantiate(fam, detail::from_unit(fam, res.x));
    fit.params = inst.params;
    fit.menu = inst.menu;
    fit.revenue = res.value;
    fit.evaluations = res.evaluations;
    return fit;
}

/// Items whose choice region carries positive area.
inline Menu effective_menu(const Menu& m, const Rect& rect, double min_area = 1e-12) {
    std::vector<MenuItem> keep;
    for (std::size_t k = 1; k < m.size(); ++k)
        if (geometry::area(choice_region(m.items(), k, rect)) > min_area) keep.push_back(m[k]);
    return Menu(keep);
}

/// Coordinate ascent of the family's revenue on a discrete instance. Each
/// payment is line-searched exactly over the prices that make some type
/// indifferent; allocation parameters are scanned on a fine grid.
inline FamilyFit refine_on_instance(const MenuFamily& fam, const DiscreteInstance& inst, std::vector<double> params,
                                    int max_sweeps = 40, int alloc_grid = 201) {
    auto revenue = [&](const std::vector<double>& p) {
        const auto m = instantiate(fam, p).menu;
        return instance_revenue(inst, m.items());
    };
    params = instantiate(fam, params).params;
    double best = revenue(params);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool improved = false;
        // Payments first: moving an allocation against stale prices tends to
        // strand the search on a plateau.
        std::vector<std::size_t> order;
        for (std::size_t k = 0; k < fam.dim(); ++k)
            if (fam.is_payment(k)) order.push_back(k);
        for (std::size_t k = 0; k < fam.dim(); ++k)
            if (!fam.is_payment(k)) order.push_back(k);
        for (std::size_t k : order) {
            std::vector<double> cand;
            if (fam.is_payment(k)) {
                // Price at which each type is indifferent between an item
                // priced by this parameter and its best alternative.
                const auto cur = instantiate(fam, params);
                for (int i = 0; i < inst.nx(); ++i) {
                    for (int j = 0; j < inst.ny(); ++j) {
                        const double x = inst.xs[i];
                        const double y = inst.ys[j];
                        double other = 0.0;
                        for (std::size_t m = 0; m < cur.items.size(); ++m)
                            if (cur.payment_param[m] != k) other = std::max(other, cur.items[m].utility(x, y));
                        for (std::size_t m = 0; m < cur.items.size(); ++m) {
                            if (cur.payment_param[m] != k) continue;
                            const double v = x * cur.items[m].q1 + y * cur.items[m].q2 - other;
                            cand.push_back(v);
                            cand.push_back(v - 1e-10);
                        }
                    }
                }
            } else {
                cand = linspace(fam.bounds[k].lo, fam.bounds[k].hi, alloc_grid);
            }
            double bk = best;
            double bv = params[k];
            for (double c : cand) {
                if (c < fam.bounds[k].lo || c > fam.bounds[k].hi) continue;
                auto trial = params;
                trial[k] = c;
                const double r = revenue(trial);
                if (r > bk + 1e-15) {
                    bk = r;
                    bv = c;
                }
            }
            if (bk > best) {
                params[k] = bv;
                params = instantiate(fam, params).params;
                best = revenue(params);
                improved = true;
            }
        }
        if (!improved) break;
    }
    FamilyFit fit;
    fit.family = fam.id;
    fit.params = params;
    fit.menu = instantiate(fam, params).menu;
    fit.revenue = best;
    return fit;
}

struct GapReport {
    double lp_revenue = 0.0;
    double family_continuous = 0.0;  // optimized expected revenue
    double family_discrete = 0.0;    // same family on the LP's instance
    double gap = 0.0;                // (lp - family_discrete) / lp
    FamilyFit fit;
    FamilyFit discrete_fit;
};

/// Gap against an already-solved LP on `inst`.
inline GapReport gap_vs_lp(const MenuFamily& fam, const ProductDistribution& d, const DiscreteInstance& inst,
                           double lp_revenue, int restarts = 8) {
    GapReport g;
    g.lp_revenue = lp_revenue;
    g.fit = optimize_family(fam, d, restarts);
    g.family_continuous = g.fit.revenue;
    g.discrete_fit = refine_on_instance(fam, inst, g.fit.params);
    g.family_discrete = g.discrete_fit.revenue;
    g.gap = lp_revenue > 0 ? (lp_revenue - g.family_discrete) / lp_revenue : 0.0;
    return g;
}

inline GapReport gap_vs_lp(const MenuFamily& fam, const ProductDistribution& d, int n, const SolveOptions& opt = {}) {
    const auto inst = discretize(d, n);
    const auto gm = solve_optimal(inst, opt);
    return gap_vs_lp(fam, d, inst, gm.expected_payment());
}

}  // namespace menulab
