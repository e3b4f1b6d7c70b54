#pragma once

#include "menulab/convolution.hpp"
#include "menulab/distributions.hpp"
#include "menulab/io/csv.hpp"
#include "menulab/lp/instance.hpp"
#include "menulab/mechanism.hpp"
#include "menulab/numerics.hpp"

#include <algorithm>
#include <array>
#include <ostream>
#include <string>
#include <vector>

namespace menulab {

struct PostedPrice {
    double price = 0.0;
    double revenue = 0.0;
};

/// Revenue-maximizing take-it-or-leave-it price for a single item, searched
/// over [0, hi] with the support endpoints as explicit candidates.
inline PostedPrice myerson_price(const Density1D& d) {
    const double ends[] = {0.0, d.lo(), d.hi()};
    const auto best = maximize_scalar([&](double p) { return p * (1.0 - d.cdf(p)); }, 0.0, d.hi(), ends);
    return {best.argmax, best.value};
}

inline double separate_sale(const ProductDistribution& d) {
    return myerson_price(d.dx).revenue + myerson_price(d.dy).revenue;
}

/// Posted prices for each item, written as a menu (the pair costs the sum).
inline Menu separate_sale_menu(const ProductDistribution& d) {
    const double p1 = myerson_price(d.dx).price;
    const double p2 = myerson_price(d.dy).price;
    return Menu{{1, 0, p1}, {0, 1, p2}, {1, 1, p1 + p2}};
}

inline PostedPrice bundle_sale(const ProductDistribution& d, const QuadratureSpec& spec = {16, 16}) {
    const double lo = d.dx.lo() + d.dy.lo();
    const double hi = d.dx.hi() + d.dy.hi();
    const double ends[] = {lo, hi};
    const auto best = maximize_scalar([&](double p) { return p * (1.0 - bundle_cdf(d, p, spec)); }, lo, hi, ends);
    return {best.argmax, best.value};
}

namespace detail {

// Best posted price for a discrete value distribution; buyers at the price
// buy (highest-payment tie rule), so the optimum sits on a support point.
inline PostedPrice discrete_posted_price(std::vector<std::pair<double, double>> vm, double tol = 1e-12) {
    std::sort(vm.begin(), vm.end());
    PostedPrice best;
    double above = 0.0;
    for (auto it = vm.rbegin(); it != vm.rend();) {
        const double p = it->first;
        while (it != vm.rend() && it->first >= p - tol) {
            above += it->second;
            ++it;
        }
        if (p * above > best.revenue) best = {p, p * above};
    }
    return best;
}

}  // namespace detail

inline PostedPrice discrete_myerson_price(const DiscreteInstance& inst, int axis) {
    std::vector<std::pair<double, double>> vm;
    for (int i = 0; i < inst.nx(); ++i)
        for (int j = 0; j < inst.ny(); ++j) vm.emplace_back(axis == 0 ? inst.xs[i] : inst.ys[j], inst.mass(i, j));
    return detail::discrete_posted_price(std::move(vm));
}

inline double discrete_separate_sale(const DiscreteInstance& inst) {
    return discrete_myerson_price(inst, 0).revenue + discrete_myerson_price(inst, 1).revenue;
}

inline PostedPrice discrete_bundle_sale(const DiscreteInstance& inst) {
    std::vector<std::pair<double, double>> vm;
    for (int i = 0; i < inst.nx(); ++i)
        for (int j = 0; j < inst.ny(); ++j) vm.emplace_back(inst.xs[i] + inst.ys[j], inst.mass(i, j));
    return detail::discrete_posted_price(std::move(vm));
}

struct AuditCheck {
    std::string name;
    bool applicable = false;
    bool passed = true;
    double lhs = 0.0;  // scaled baseline
    double rhs = 0.0;  // LP revenue minus tolerance
};

struct BaselineReport {
    std::string scenario_id;
    double separate_revenue = 0.0;  // on the discrete instance
    double bundle_revenue = 0.0;
    double lp_revenue = 0.0;
    double separate_continuous = 0.0;
    double bundle_continuous = 0.0;
    std::array<bool, 5> conditions{};
    std::vector<AuditCheck> checks;

    [[nodiscard]] double ratio_separate() const { return separate_revenue > 0 ? lp_revenue / separate_revenue : 0.0; }
    [[nodiscard]] double ratio_bundle() const { return bundle_revenue > 0 ? lp_revenue / bundle_revenue : 0.0; }
    [[nodiscard]] bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return !c.applicable || c.passed; });
    }
};

/// Ratio checks against an already-solved LP revenue on `inst`. Failures
/// are recorded in the report rather than thrown.
inline BaselineReport audit_ratios(const ProductDistribution& d, const DiscreteInstance& inst, double lp_revenue,
                                   std::string scenario_id = {}, double tol = 1e-6) {
    BaselineReport r;
    r.scenario_id = std::move(scenario_id);
    r.lp_revenue = lp_revenue;
    r.separate_revenue = discrete_separate_sale(inst);
    r.bundle_revenue = discrete_bundle_sale(inst).revenue;
    r.separate_continuous = separate_sale(d);
    r.bundle_continuous = bundle_sale(d).revenue;
    for (int c = 1; c <= 5; ++c) r.conditions[c - 1] = check_condition(d, c).holds;

    auto add = [&](std::string name, bool applicable, double scaled) {
        r.checks.push_back({std::move(name), applicable, scaled >= lp_revenue - tol, scaled, lp_revenue - tol});
    };
    add("separate*2>=lp", true, 2.0 * r.separate_revenue);
    add("bundle*3>=lp", r.conditions[1] && r.conditions[2], 3.0 * r.bundle_revenue);
    add("bundle*2>=lp", r.conditions[1] && r.conditions[3], 2.0 * r.bundle_revenue);
    // Both baselines are feasible points of the LP.
    r.checks.push_back({"lp>=max(separate,bundle)", true,
                        lp_revenue >= std::max(r.separate_revenue, r.bundle_revenue) - 1e-8,
                        std::max(r.separate_revenue, r.bundle_revenue), lp_revenue + 1e-8});
    return r;
}

inline BaselineReport audit_ratios(const ProductDistribution& d, int n, const SolveOptions& opt = {},
                                   std::string scenario_id = {}) {
    const auto inst = discretize(d, n);
    const auto gm = solve_optimal(inst, opt);
    return audit_ratios(d, inst, gm.expected_payment(), std::move(scenario_id));
}

inline void write_baseline_header(std::ostream& os) {
    io::CsvWriter(os).header({"scenario_id", "separate", "bundle", "lp", "ratio_sep", "ratio_bundle", "cond1", "cond2",
                              "cond3", "cond4", "cond5"});
}

inline void write_baseline_row(std::ostream& os, const BaselineReport& r) {
    io::CsvWriter w(os);
    w.cell(r.scenario_id).cell(r.separate_revenue).cell(r.bundle_revenue).cell(r.lp_revenue);
    w.cell(r.ratio_separate()).cell(r.ratio_bundle());
    for (bool c : r.conditions) w.cell(c);
    w.end_row();
}

}  // namespace menulab
