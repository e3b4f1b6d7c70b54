#pragma once

#include "menulab/distributions.hpp"
#include "menulab/errors.hpp"
#include "menulab/lp/linear_program.hpp"
#include "menulab/lp/simplex.hpp"
#include "menulab/mechanism.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace menulab {

/// Finite type space with probability masses; entry (i, j) is (xs[i], ys[j]).
struct DiscreteInstance {
    std::vector<double> xs;
    std::vector<double> ys;
    Eigen::MatrixXd mass;

    [[nodiscard]] int nx() const { return static_cast<int>(xs.size()); }
    [[nodiscard]] int ny() const { return static_cast<int>(ys.size()); }
    [[nodiscard]] int types() const { return nx() * ny(); }

    void check() const {
        if (xs.empty() || ys.empty()) throw PreconditionError("DiscreteInstance: empty grid");
        if (mass.rows() != nx() || mass.cols() != ny()) throw PreconditionError("DiscreteInstance: mass shape mismatch");
        for (std::size_t k = 1; k < xs.size(); ++k)
            if (!(xs[k] > xs[k - 1])) throw PreconditionError("DiscreteInstance: xs not strictly increasing");
        for (std::size_t k = 1; k < ys.size(); ++k)
            if (!(ys[k] > ys[k - 1])) throw PreconditionError("DiscreteInstance: ys not strictly increasing");
        if ((mass.array() < 0.0).any()) throw PreconditionError("DiscreteInstance: negative mass");
        if (std::abs(mass.sum() - 1.0) > 1e-12) throw PreconditionError("DiscreteInstance: masses do not sum to 1");
    }
};

namespace detail {

// Cell masses of one marginal on an n-cell uniform partition.
inline std::vector<double> cell_masses(const Density1D& d, int n) {
    std::vector<double> w(n);
    const double h = (d.hi() - d.lo()) / n;
    double prev = 0.0;
    for (int k = 0; k < n; ++k) {
        const double next = (k == n - 1) ? 1.0 : d.cdf(d.lo() + (k + 1) * h);
        w[k] = next - prev;
        prev = next;
    }
    return w;
}

inline std::vector<double> cell_midpoints(const Density1D& d, int n) {
    std::vector<double> v(n);
    const double h = (d.hi() - d.lo()) / n;
    for (int k = 0; k < n; ++k) v[k] = d.lo() + (k + 0.5) * h;
    return v;
}

}  // namespace detail

/// n x n midpoint grid; each type carries the probability of its cell.
inline DiscreteInstance discretize(const ProductDistribution& d, int n) {
    if (n < 2) throw PreconditionError("discretize requires n >= 2");
    DiscreteInstance inst;
    inst.xs = detail::cell_midpoints(d.dx, n);
    inst.ys = detail::cell_midpoints(d.dy, n);
    const auto wx = detail::cell_masses(d.dx, n);
    const auto wy = detail::cell_masses(d.dy, n);
    inst.mass.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) inst.mass(i, j) = wx[i] * wy[j];
    inst.mass /= inst.mass.sum();
    return inst;
}

inline constexpr int kDefaultMaxTypesPerAxis = 40;

/// Column index of q1 for the type (i, j); q2 and t follow.
inline int lp_column(const DiscreteInstance& inst, int i, int j) { return 3 * (i * inst.ny() + j); }

/// maximize sum mass * t subject to IR, IC for every ordered pair of types,
/// 0 <= q <= 1 and (optionally) q1 + q2 <= 1. Row order: IC rows for each
/// ordered pair, then IR rows, then unit-demand rows.
inline lp::LinearProgram build_lp(const DiscreteInstance& inst, bool unit_demand,
                                  int max_per_axis = kDefaultMaxTypesPerAxis) {
    inst.check();
    if (inst.nx() > max_per_axis || inst.ny() > max_per_axis) {
        throw PreconditionError("build_lp: instance of " + std::to_string(inst.nx()) + "x" +
                                std::to_string(inst.ny()) + " types exceeds the " + std::to_string(max_per_axis) +
                                "x" + std::to_string(max_per_axis) + " guard");
    }
    lp::LinearProgram prog;
    for (int i = 0; i < inst.nx(); ++i) {
        for (int j = 0; j < inst.ny(); ++j) {
            prog.add_variable(0.0, 1.0, 0.0);
            prog.add_variable(0.0, 1.0, 0.0);
            prog.add_variable(-lp::kInf, lp::kInf, inst.mass(i, j));
        }
    }
    const int n = inst.types();
    // x q1(a) + y q2(a) - t(a) >= x q1(b) + y q2(b) - t(b) for type a = (x, y).
    for (int a = 0; a < n; ++a) {
        const int ia = a / inst.ny();
        const int ja = a % inst.ny();
        const double x = inst.xs[ia];
        const double y = inst.ys[ja];
        for (int b = 0; b < n; ++b) {
            if (b == a) continue;
            prog.add_row(lp::RowSense::greater_equal, 0.0,
                         {{3 * a, x}, {3 * a + 1, y}, {3 * a + 2, -1.0}, {3 * b, -x}, {3 * b + 1, -y}, {3 * b + 2, 1.0}});
        }
    }
    for (int a = 0; a < n; ++a) {
        const double x = inst.xs[a / inst.ny()];
        const double y = inst.ys[a % inst.ny()];
        prog.add_row(lp::RowSense::greater_equal, 0.0, {{3 * a, x}, {3 * a + 1, y}, {3 * a + 2, -1.0}});
    }
    if (unit_demand) {
        for (int a = 0; a < n; ++a) prog.add_row(lp::RowSense::less_equal, 1.0, {{3 * a, 1.0}, {3 * a + 1, 1.0}});
    }
    return prog;
}

struct SolveOptions {
    bool unit_demand = false;
    int max_per_axis = kDefaultMaxTypesPerAxis;
    double validation_tol = 1e-8;
    lp::SimplexOptions simplex;
};

/// Optimal mechanism of the discrete instance, re-validated outside the solver.
inline GridMechanism solve_optimal(const DiscreteInstance& inst, const SolveOptions& opt = {}) {
    const auto prog = build_lp(inst, opt.unit_demand, opt.max_per_axis);
    const auto res = lp::simplex_solve(prog, opt.simplex);
    if (res.status != lp::SimplexStatus::optimal) {
        throw SolverError("simplex terminated with status " + std::string(lp::to_string(res.status)));
    }
    GridMechanism gm;
    gm.xs = inst.xs;
    gm.ys = inst.ys;
    gm.mass = inst.mass;
    const int nx = inst.nx();
    const int ny = inst.ny();
    gm.q1.resize(nx, ny);
    gm.q2.resize(nx, ny);
    gm.t.resize(nx, ny);
    gm.u.resize(nx, ny);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const int c = lp_column(inst, i, j);
            gm.q1(i, j) = std::clamp(res.primal[c], 0.0, 1.0);
            gm.q2(i, j) = std::clamp(res.primal[c + 1], 0.0, 1.0);
            gm.t(i, j) = res.primal[c + 2];
            gm.u(i, j) = inst.xs[i] * gm.q1(i, j) + inst.ys[j] * gm.q2(i, j) - gm.t(i, j);
        }
    }
    const auto rep = validate(gm, {opt.unit_demand}, opt.validation_tol);
    if (!rep.ok()) throw SolverError("LP solution failed validation: " + rep.describe());
    return gm;
}

inline GridMechanism solve_optimal(const DiscreteInstance& inst, bool unit_demand) {
    SolveOptions opt;
    opt.unit_demand = unit_demand;
    return solve_optimal(inst, opt);
}

/// Expected payment of a menu on the instance's types.
inline double instance_revenue(const DiscreteInstance& inst, std::span<const MenuItem> menu, double tol = 1e-9) {
    double r = 0.0;
    for (int i = 0; i < inst.nx(); ++i)
        for (int j = 0; j < inst.ny(); ++j)
            r += inst.mass(i, j) * menu[best_response(menu, inst.xs[i], inst.ys[j], tol).index].t;
    return r;
}

}  // namespace menulab
