#pragma once

#include "menulab/errors.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace menulab::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { less_equal, greater_equal, equal };

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// maximize objective . z  subject to  rows (sense) rhs,  lower <= z <= upper.
/// Constraint coefficients are stored as sparse triplets.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<RowSense> senses;
    std::vector<double> rhs;
    std::vector<Triplet> entries;

    [[nodiscard]] int num_variables() const { return static_cast<int>(objective.size()); }
    [[nodiscard]] int num_rows() const { return static_cast<int>(senses.size()); }

    int add_variable(double lo, double hi, double cost) {
        objective.push_back(cost);
        lower.push_back(lo);
        upper.push_back(hi);
        return num_variables() - 1;
    }

    int add_row(RowSense sense, double b, std::span<const std::pair<int, double>> coefs) {
        const int r = num_rows();
        senses.push_back(sense);
        rhs.push_back(b);
        for (const auto& [col, v] : coefs) entries.push_back({r, col, v});
        return r;
    }

    int add_row(RowSense sense, double b, std::initializer_list<std::pair<int, double>> coefs) {
        return add_row(sense, b, std::span<const std::pair<int, double>>(coefs.begin(), coefs.size()));
    }

    /// Number of stored coefficients in each row.
    [[nodiscard]] std::vector<int> row_lengths() const {
        std::vector<int> len(num_rows(), 0);
        for (const auto& e : entries) ++len[e.row];
        return len;
    }

    void check_consistent() const {
        const int n = num_variables();
        if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n ||
            rhs.size() != senses.size()) {
            throw PreconditionError("LinearProgram: inconsistent dimensions");
        }
        for (int j = 0; j < n; ++j) {
            if (lower[j] > upper[j]) throw PreconditionError("LinearProgram: lower bound exceeds upper bound");
        }
        for (const auto& e : entries) {
            if (e.row < 0 || e.row >= num_rows() || e.col < 0 || e.col >= n || !std::isfinite(e.value)) {
                throw PreconditionError("LinearProgram: coefficient outside the declared dimensions");
            }
        }
    }

    /// Largest violation of rows and bounds at z.
    [[nodiscard]] double max_violation(std::span<const double> z) const {
        std::vector<double> activity(num_rows(), 0.0);
        for (const auto& e : entries) activity[e.row] += e.value * z[e.col];
        double worst = 0.0;
        for (int r = 0; r < num_rows(); ++r) {
            const double diff = activity[r] - rhs[r];
            switch (senses[r]) {
                case RowSense::less_equal: worst = std::max(worst, diff); break;
                case RowSense::greater_equal: worst = std::max(worst, -diff); break;
                case RowSense::equal: worst = std::max(worst, std::abs(diff)); break;
            }
        }
        for (int j = 0; j < num_variables(); ++j) {
            worst = std::max({worst, lower[j] - z[j], z[j] - upper[j]});
        }
        return worst;
    }
};

}  // namespace menulab::lp
