#pragma once

#include "menulab/errors.hpp"
#include "menulab/lp/linear_program.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace menulab::lp {

enum class SimplexStatus { optimal, unbounded, infeasible, iteration_limit };

inline std::string_view to_string(SimplexStatus s) {
    switch (s) {
        case SimplexStatus::optimal: return "optimal";
        case SimplexStatus::unbounded: return "unbounded";
        case SimplexStatus::infeasible: return "infeasible";
        case SimplexStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

struct SimplexOptions {
    std::int64_t max_pivots = 1'000'000;
    double optimality_tol = 1e-9;  // reduced-cost threshold
    double feasibility_tol = 1e-9;
    double pivot_tol = 1e-9;
    int refactor_every = 100;
    int bland_after = 50;  // consecutive degenerate pivots before Bland's rule
};

struct SimplexResult {
    SimplexStatus status = SimplexStatus::iteration_limit;
    double objective = 0.0;
    std::vector<double> primal;
    std::int64_t pivots = 0;
    double max_violation = 0.0;  // of the original LP at `primal`
};

/// Sparse column storage for a standard-form problem.
struct SparseColumns {
    int rows = 0;
    std::vector<int> start{0};
    std::vector<int> index;
    std::vector<double> value;

    [[nodiscard]] int cols() const { return static_cast<int>(start.size()) - 1; }

    void push_column(std::span<const std::pair<int, double>> entries) {
        for (const auto& [r, v] : entries) {
            if (v == 0.0) continue;
            index.push_back(r);
            value.push_back(v);
        }
        start.push_back(static_cast<int>(index.size()));
    }

    [[nodiscard]] double dot(int col, const Eigen::VectorXd& y) const {
        double s = 0.0;
        for (int k = start[col]; k < start[col + 1]; ++k) s += value[k] * y[index[k]];
        return s;
    }
};

/// Two-phase revised simplex for  min c.w  s.t.  A w = b,  w >= 0,  b >= 0.
/// Dense explicit basis inverse with product-form rank-1 updates and periodic
/// refactorization. Devex pricing (Dantzig-style reference weights); Bland's rule after a run of degenerate
/// pivots.
class RevisedSimplex {
public:
    enum class Outcome { optimal, unbounded, infeasible, iteration_limit };

    RevisedSimplex(const SparseColumns& a, std::vector<double> b, std::vector<double> c, const SimplexOptions& opt)
        : a_(a), b_(std::move(b)), cost_(std::move(c)), opt_(opt), m_(a.rows), n_(a.cols()) {
        for (double v : b_) {
            if (v < 0.0) throw PreconditionError("RevisedSimplex requires b >= 0");
        }
    }

    Outcome solve() {
        // Phase 1: artificial j = n_ + i sits in row i.
        basis_.resize(m_);
        for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
        binv_ = Eigen::MatrixXd::Identity(m_, m_);
        xb_ = Eigen::Map<const Eigen::VectorXd>(b_.data(), m_);
        in_basis_.assign(n_ + m_, -1);
        rejected_.assign(n_, 0);
        for (int i = 0; i < m_; ++i) in_basis_[n_ + i] = i;

        phase_ = 1;
        Outcome out = iterate();
        if (out == Outcome::iteration_limit) return out;
        double infeas = 0.0;
        for (int i = 0; i < m_; ++i)
            if (basis_[i] >= n_) infeas += xb_[i];
        double scale = 1.0;
        for (double v : b_) scale = std::max(scale, std::abs(v));
        if (infeas > 1e-7 * scale) return Outcome::infeasible;
        drive_out_artificials();

        phase_ = 2;
        return iterate();
    }

    [[nodiscard]] std::vector<double> solution() const {
        std::vector<double> w(n_, 0.0);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < n_) w[basis_[i]] = std::max(0.0, xb_[i]);
        return w;
    }

    /// Simplex multipliers c_B B^-1 of the final basis.
    [[nodiscard]] std::vector<double> multipliers() const {
        const Eigen::VectorXd pi = compute_pi();
        return {pi.data(), pi.data() + m_};
    }

    [[nodiscard]] double objective() const {
        double v = 0.0;
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < n_) v += cost_[basis_[i]] * xb_[i];
        return v;
    }

    [[nodiscard]] std::int64_t pivots() const { return pivots_; }

private:
    [[nodiscard]] double cost_of(int j) const {
        if (j >= n_) return phase_ == 1 ? 1.0 : 0.0;
        return phase_ == 1 ? 0.0 : cost_[j];
    }

    [[nodiscard]] Eigen::VectorXd compute_pi() const {
        Eigen::VectorXd cb(m_);
        for (int i = 0; i < m_; ++i) cb[i] = cost_of(basis_[i]);
        return binv_.transpose() * cb;
    }

    [[nodiscard]] Eigen::VectorXd column(int j) const {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(m_);
        if (j >= n_) {
            col = binv_.col(j - n_);
            return col;
        }
        const int k0 = a_.start[j];
        const int k1 = a_.start[j + 1];
        for (int i = 0; i < m_; ++i) {
            const double* row = binv_.data() + static_cast<std::ptrdiff_t>(i) * m_;
            double s = 0.0;
            for (int k = k0; k < k1; ++k) s += a_.value[k] * row[a_.index[k]];
            col[i] = s;
        }
        return col;
    }

    void refactor() {
        Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m_, m_);
        for (int i = 0; i < m_; ++i) {
            const int j = basis_[i];
            if (j >= n_) {
                basis(j - n_, i) = 1.0;
            } else {
                for (int k = a_.start[j]; k < a_.start[j + 1]; ++k) basis(a_.index[k], i) = a_.value[k];
            }
        }
        binv_ = basis.partialPivLu().inverse();
        if (!binv_.allFinite()) throw SolverError("simplex basis became singular after " + std::to_string(pivots_) + " pivots");
        xb_ = binv_ * Eigen::Map<const Eigen::VectorXd>(b_.data(), m_);
        for (int i = 0; i < m_; ++i)
            if (xb_[i] < 0.0 && xb_[i] > -opt_.feasibility_tol) xb_[i] = 0.0;
    }

    void pivot(int r, int q, const Eigen::VectorXd& alpha) {
        const double ar = alpha[r];
        const double theta = xb_[r] / ar;
        xb_.noalias() -= theta * alpha;
        xb_[r] = theta;
        const Eigen::RowVectorXd prow = binv_.row(r) / ar;
        for (int i = 0; i < m_; ++i) {
            if (alpha[i] != 0.0 && i != r) binv_.row(i).noalias() -= alpha[i] * prow;
        }
        binv_.row(r) = prow;

        in_basis_[basis_[r]] = -1;
        basis_[r] = q;
        in_basis_[q] = r;
        ++pivots_;
        if (++since_refactor_ >= opt_.refactor_every) {
            refactor();
            since_refactor_ = 0;
        }
    }

    Outcome iterate() {
        int degenerate_run = 0;
        Eigen::VectorXd pi;
        std::vector<double> weight(n_, 1.0);  // Devex reference weights
        std::vector<double> reduced(n_, 0.0);
        bool fresh = false;
        while (true) {
            if (pivots_ >= opt_.max_pivots) return Outcome::iteration_limit;
            if (since_refactor_ == 0 && !fresh) {
                // Reduced costs are carried forward between refactorizations.
                pi = compute_pi();
                for (int j = 0; j < n_; ++j) reduced[j] = in_basis_[j] >= 0 ? 0.0 : cost_of(j) - a_.dot(j, pi);
                fresh = true;
            }
            const bool bland = degenerate_run >= opt_.bland_after;

            int q = -1;
            double best = 0.0;
            for (int j = 0; j < n_; ++j) {
                if (in_basis_[j] >= 0 || rejected_[j]) continue;
                const double d = reduced[j];
                if (d >= -opt_.optimality_tol) continue;
                if (bland) {
                    q = j;
                    break;
                }
                const double score = d * d / weight[j];
                if (score > best) {
                    best = score;
                    q = j;
                }
            }
            if (q < 0) {
                if (!fresh) {
                    since_refactor_ = 0;
                    refactor();
                    continue;
                }
                if (rejected_count_ == 0) return Outcome::optimal;
                // Only columns with unusable pivots remain improving.
                if (++stalls_ > kMaxStalls) throw SolverError("simplex stalled on numerically unusable pivots");
                clear_rejected();
                allow_small_ = true;
                continue;
            }

            const Eigen::VectorXd alpha = column(q);
            const int r = bland ? ratio_test_bland(alpha) : ratio_test_harris(alpha);
            if (r < 0) {
                if (fresh) return Outcome::unbounded;
                since_refactor_ = 0;
                refactor();
                continue;
            }

            const double ar = alpha[r];
            // A pivot that is tiny relative to its column is most likely
            // rounding noise on an exact zero; pivoting on it would make the
            // basis (nearly) singular. Skip that column for now.
            if (!allow_small_ && !stuck_artificial(r, ar) &&
                std::abs(ar) < std::max(kMinPivot, 1e-9 * alpha.cwiseAbs().maxCoeff())) {
                rejected_[q] = 1;
                ++rejected_count_;
                continue;
            }
            allow_small_ = false;
            const Eigen::VectorXd rho = binv_.row(r).transpose();
            if (xb_[r] < 0.0) xb_[r] = 0.0;
            const double step = xb_[r] / ar;
            degenerate_run = (step * std::abs(ar) <= opt_.feasibility_tol) ? degenerate_run + 1 : 0;

            const double wq = weight[q];
            const double dq = reduced[q];
            for (int j = 0; j < n_; ++j) {
                if (in_basis_[j] >= 0 || j == q) continue;
                const double arj = a_.dot(j, rho) / ar;
                if (arj == 0.0) continue;
                reduced[j] -= dq * arj;
                weight[j] = std::max(weight[j], arj * arj * wq);
            }
            const int leaving = basis_[r];
            pivot(r, q, alpha);
            if (rejected_count_ > 0) clear_rejected();
            reduced[q] = 0.0;
            if (leaving < n_) {
                reduced[leaving] = -dq / ar;
                weight[leaving] = std::max(wq / (ar * ar), 1.0);
            }
            if (wq > 1e8) std::fill(weight.begin(), weight.end(), 1.0);
            fresh = false;
        }
    }

    // Rows whose basic artificial sits in a redundant row (phase 2) must leave
    // at ratio zero whenever the entering column touches them.
    [[nodiscard]] bool stuck_artificial(int i, double ai) const {
        return phase_ == 2 && basis_[i] >= n_ && std::abs(ai) > opt_.pivot_tol;
    }

    // Two passes: the largest step allowed when every basic variable may dip
    // to -feasibility_tol, then the largest |alpha| among rows blocking
    // within that step.
    [[nodiscard]] int ratio_test_harris(const Eigen::VectorXd& alpha) const {
        double bound = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m_; ++i) {
            if (stuck_artificial(i, alpha[i])) return largest_stuck(alpha);
            if (alpha[i] > opt_.pivot_tol) bound = std::min(bound, (std::max(0.0, xb_[i]) + opt_.feasibility_tol) / alpha[i]);
        }
        int r = -1;
        for (int i = 0; i < m_; ++i) {
            const double ai = alpha[i];
            if (ai <= opt_.pivot_tol) continue;
            if (std::max(0.0, xb_[i]) / ai <= bound && (r < 0 || ai > alpha[r])) r = i;
        }
        return r;
    }

    [[nodiscard]] int largest_stuck(const Eigen::VectorXd& alpha) const {
        int r = -1;
        for (int i = 0; i < m_; ++i)
            if (stuck_artificial(i, alpha[i]) && (r < 0 || std::abs(alpha[i]) > std::abs(alpha[r]))) r = i;
        return r;
    }

    // Textbook minimum ratio; ties go to the smallest basic index.
    [[nodiscard]] int ratio_test_bland(const Eigen::VectorXd& alpha) const {
        int r = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m_; ++i) {
            const double ai = alpha[i];
            double ratio;
            if (stuck_artificial(i, ai)) {
                ratio = 0.0;
            } else {
                if (ai <= opt_.pivot_tol) continue;
                ratio = std::max(0.0, xb_[i]) / ai;
            }
            if (ratio < best - 1e-12 || (ratio <= best + 1e-12 && r >= 0 && basis_[i] < basis_[r])) {
                r = i;
                best = std::min(best, ratio);
            }
        }
        return r;
    }

    void clear_rejected() {
        std::fill(rejected_.begin(), rejected_.end(), 0);
        rejected_count_ = 0;
    }

    void drive_out_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (basis_[r] < n_) continue;
            const Eigen::VectorXd rho = binv_.row(r).transpose();
            int best_j = -1;
            double best_v = 1e-7;
            for (int j = 0; j < n_; ++j) {
                if (in_basis_[j] >= 0) continue;
                const double v = std::abs(a_.dot(j, rho));
                if (v > best_v) {
                    best_v = v;
                    best_j = j;
                }
            }
            if (best_j >= 0) pivot(r, best_j, column(best_j));
        }
    }

    const SparseColumns& a_;
    std::vector<double> b_;
    std::vector<double> cost_;
    SimplexOptions opt_;
    int m_;
    int n_;
    int phase_ = 1;
    std::vector<int> basis_;
    std::vector<int> in_basis_;
    // Row-major: pivots update and read whole rows.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> binv_;
    Eigen::VectorXd xb_;
    std::int64_t pivots_ = 0;
    int since_refactor_ = 0;
    std::vector<char> rejected_;
    int rejected_count_ = 0;
    bool allow_small_ = false;
    int stalls_ = 0;
    static constexpr double kMinPivot = 1e-6;
    static constexpr int kMaxStalls = 1000;
};

namespace detail {

// Primal rows after bound substitution: all <= or =.
struct NormalizedLp {
    struct Row {
        bool equality = false;
        double rhs = 0.0;
        std::vector<std::pair<int, double>> coefs;
    };
    std::vector<Row> rows;
    std::vector<double> cost;   // transformed objective (maximize)
    std::vector<double> shift;  // z = shift + sign * z'
    std::vector<double> sign;
    std::vector<bool> free;
    double constant = 0.0;
};

inline NormalizedLp normalize(const LinearProgram& lp) {
    NormalizedLp out;
    const int n = lp.num_variables();
    out.cost.resize(n);
    out.shift.assign(n, 0.0);
    out.sign.assign(n, 1.0);
    out.free.assign(n, false);
    std::vector<NormalizedLp::Row> bound_rows;
    for (int j = 0; j < n; ++j) {
        const double lo = lp.lower[j];
        const double hi = lp.upper[j];
        if (std::isfinite(lo)) {
            out.shift[j] = lo;
            if (std::isfinite(hi)) bound_rows.push_back({false, hi - lo, {{j, 1.0}}});
        } else if (std::isfinite(hi)) {
            out.shift[j] = hi;
            out.sign[j] = -1.0;
        } else {
            out.free[j] = true;
        }
        out.cost[j] = lp.objective[j] * out.sign[j];
        out.constant += lp.objective[j] * out.shift[j];
    }
    out.rows.resize(lp.num_rows());
    for (int r = 0; r < lp.num_rows(); ++r) {
        out.rows[r].equality = lp.senses[r] == RowSense::equal;
        out.rows[r].rhs = lp.rhs[r];
    }
    for (const auto& e : lp.entries) {
        out.rows[e.row].coefs.emplace_back(e.col, e.value * out.sign[e.col]);
        out.rows[e.row].rhs -= e.value * out.shift[e.col];
    }
    for (int r = 0; r < lp.num_rows(); ++r) {
        if (lp.senses[r] == RowSense::greater_equal) {
            out.rows[r].rhs = -out.rows[r].rhs;
            for (auto& [c, v] : out.rows[r].coefs) v = -v;
        }
    }
    for (auto& br : bound_rows) out.rows.push_back(std::move(br));
    return out;
}

struct DualSolve {
    RevisedSimplex::Outcome outcome = RevisedSimplex::Outcome::iteration_limit;
    std::vector<double> z;  // transformed primal values z'
    double objective = 0.0;
    std::int64_t pivots = 0;
};

// min b'.lambda  s.t.  A'^T lambda (>= or =) c',  lambda >= 0 on <= rows.
inline DualSolve solve_dual(const NormalizedLp& p, const std::vector<double>& cost, const SimplexOptions& opt) {
    const int n = static_cast<int>(cost.size());
    std::vector<double> flip(n, 1.0);
    std::vector<double> rhs(n);
    for (int j = 0; j < n; ++j) {
        if (cost[j] < 0) flip[j] = -1.0;
        rhs[j] = cost[j] * flip[j];
    }
    SparseColumns cols;
    cols.rows = n;
    std::vector<double> dual_cost;
    std::vector<std::pair<int, double>> buf;
    for (const auto& row : p.rows) {
        buf.clear();
        for (const auto& [j, v] : row.coefs) buf.emplace_back(j, v * flip[j]);
        cols.push_column(buf);
        dual_cost.push_back(row.rhs);
        if (row.equality) {
            for (auto& e : buf) e.second = -e.second;
            cols.push_column(buf);
            dual_cost.push_back(-row.rhs);
        }
    }
    for (int j = 0; j < n; ++j) {
        if (p.free[j]) continue;
        const std::pair<int, double> e{j, -flip[j]};
        cols.push_column(std::span(&e, 1));
        dual_cost.push_back(0.0);
    }

    RevisedSimplex solver(cols, rhs, dual_cost, opt);
    DualSolve out{solver.solve(), {}, 0.0, 0};
    out.pivots = solver.pivots();
    if (out.outcome == RevisedSimplex::Outcome::optimal) {
        const auto pi = solver.multipliers();
        out.z.resize(n);
        for (int j = 0; j < n; ++j) out.z[j] = pi[j] * flip[j];
        out.objective = solver.objective();
    }
    return out;
}

}  // namespace detail

/// Solves the LP through its dual: the basis has one row per primal
/// variable, which keeps dense factorization affordable when the constraint
/// count dwarfs the variable count (the IC system has O(types^2) rows).
inline SimplexResult simplex_solve(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    lp.check_consistent();
    const auto norm = detail::normalize(lp);
    SimplexResult res;
    SimplexOptions used = opt;
    detail::DualSolve dual;
    for (int attempt = 0;; ++attempt) {
        try {
            dual = detail::solve_dual(norm, norm.cost, used);
            break;
        } catch (const SolverError&) {
            // A basis lost rank through accumulated update error: restart
            // with more frequent refactorization.
            if (attempt == 2 || used.refactor_every <= 10) throw;
            used.refactor_every = std::max(10, used.refactor_every / 4);
        }
    }
    res.pivots = dual.pivots;
    using O = RevisedSimplex::Outcome;
    switch (dual.outcome) {
        case O::optimal: {
            res.status = SimplexStatus::optimal;
            const int n = lp.num_variables();
            res.primal.resize(n);
            for (int j = 0; j < n; ++j) res.primal[j] = norm.shift[j] + norm.sign[j] * dual.z[j];
            res.objective = 0.0;
            for (int j = 0; j < n; ++j) res.objective += lp.objective[j] * res.primal[j];
            res.max_violation = lp.max_violation(res.primal);
            break;
        }
        case O::unbounded: res.status = SimplexStatus::infeasible; break;
        case O::iteration_limit: res.status = SimplexStatus::iteration_limit; break;
        case O::infeasible: {
            // Dual infeasible: the primal is unbounded or infeasible. The
            // zero-objective dual is always feasible and is unbounded exactly
            // when the primal rows admit no solution.
            auto probe = detail::solve_dual(norm, std::vector<double>(norm.cost.size(), 0.0), used);
            res.pivots += probe.pivots;
            res.status = probe.outcome == O::unbounded ? SimplexStatus::infeasible : SimplexStatus::unbounded;
            break;
        }
    }
    return res;
}

}  // namespace menulab::lp
