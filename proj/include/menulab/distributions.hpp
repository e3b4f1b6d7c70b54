#pragma once

#include "menulab/errors.hpp"
#include "menulab/numerics.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace menulab {

enum class DensityKind { uniform, power, truncated_exponential, poly_exp, tabulated };

inline std::string_view to_string(DensityKind k) {
    switch (k) {
        case DensityKind::uniform: return "uniform";
        case DensityKind::power: return "power";
        case DensityKind::truncated_exponential: return "truncated_exponential";
        case DensityKind::poly_exp: return "poly_exp";
        case DensityKind::tabulated: return "tabulated";
    }
    return "unknown";
}

struct UniformShape {
    bool operator==(const UniformShape&) const = default;
};

/// a * x^b; `a` is absorbed by normalization.
struct PowerShape {
    double a = 1.0;
    double b = 0.0;
    bool operator==(const PowerShape&) const = default;
};

/// lambda * exp(-lambda x) restricted to the support.
struct TruncatedExponentialShape {
    double lambda = 1.0;
    bool operator==(const TruncatedExponentialShape&) const = default;
};

/// P(x) * exp(Q(x)); coefficients in ascending powers.
struct PolyExpShape {
    std::vector<double> coeffs;
    std::vector<double> exp_coeffs;
    bool operator==(const PolyExpShape&) const = default;
};

/// Samples on an equally spaced grid spanning the support, joined by a C1
/// cubic Hermite interpolant.
struct TabulatedShape {
    std::vector<double> values;
    bool operator==(const TabulatedShape&) const = default;
};

using DensityShape = std::variant<UniformShape, PowerShape, TruncatedExponentialShape, PolyExpShape, TabulatedShape>;

namespace detail {

inline double polyval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

inline double polyder(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) v = v * x + static_cast<double>(k) * c[k];
    return v;
}

inline std::string fmt_point(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

}  // namespace detail

/// A normalized, strictly positive, bounded density on a closed interval of
/// the nonnegative reals. Immutable after construction.
class Density1D {
public:
    Density1D(DensityShape shape, Interval support) : shape_(std::move(shape)), support_(support) {
        if (!(support_.lo >= 0.0) || !(support_.lo < support_.hi) || !std::isfinite(support_.hi)) {
            throw PreconditionError("density support must satisfy 0 <= lo < hi < inf");
        }
        validate_shape();
        init_normalization();
        verify_positive();
    }

    static Density1D uniform(double lo, double hi) { return {UniformShape{}, {lo, hi}}; }
    static Density1D power(double b, double lo, double hi, double a = 1.0) { return {PowerShape{a, b}, {lo, hi}}; }
    static Density1D truncated_exponential(double lambda, double lo, double hi) {
        return {TruncatedExponentialShape{lambda}, {lo, hi}};
    }
    static Density1D poly_exp(std::vector<double> coeffs, std::vector<double> exp_coeffs, double lo, double hi) {
        return {PolyExpShape{std::move(coeffs), std::move(exp_coeffs)}, {lo, hi}};
    }
    static Density1D tabulated(std::vector<double> values, double lo, double hi) {
        return {TabulatedShape{std::move(values)}, {lo, hi}};
    }

    [[nodiscard]] DensityKind kind() const { return static_cast<DensityKind>(shape_.index()); }
    [[nodiscard]] const DensityShape& shape() const { return shape_; }
    [[nodiscard]] Interval support() const { return support_; }
    [[nodiscard]] double lo() const { return support_.lo; }
    [[nodiscard]] double hi() const { return support_.hi; }

    [[nodiscard]] double pdf(double x) const {
        if (x < support_.lo || x > support_.hi) return 0.0;
        return raw(x) / norm_;
    }

    [[nodiscard]] double pdf_derivative(double x) const {
        if (x < support_.lo || x > support_.hi) return 0.0;
        if (kind() == DensityKind::tabulated) return fd_derivative(x) / norm_;
        return raw_derivative(x) / norm_;
    }

    [[nodiscard]] double cdf(double x) const {
        if (x <= support_.lo) return 0.0;
        if (x >= support_.hi) return 1.0;
        return std::clamp(raw_cdf(x) / norm_, 0.0, 1.0);
    }

    /// x h'(x) / h(x). Closed form for the parametric kinds, central finite
    /// difference (step 1e-6 of the support width) for tabulated densities.
    [[nodiscard]] double power_rate(double x) const {
        if (!(x >= support_.lo && x <= support_.hi)) {
            throw DomainError("power_rate: x = " + detail::fmt_point(x) + " lies outside the support");
        }
        switch (kind()) {
            case DensityKind::uniform: return 0.0;
            case DensityKind::power: return std::get<PowerShape>(shape_).b;
            case DensityKind::truncated_exponential: return -std::get<TruncatedExponentialShape>(shape_).lambda * x;
            case DensityKind::poly_exp: {
                const auto& s = std::get<PolyExpShape>(shape_);
                const double p = detail::polyval(s.coeffs, x);
                if (p == 0.0) throw DomainError("power_rate: density vanishes at x = " + detail::fmt_point(x));
                return x * (detail::polyder(s.coeffs, x) / p + detail::polyder(s.exp_coeffs, x));
            }
            case DensityKind::tabulated: return x * fd_derivative(x) / raw(x);
        }
        return 0.0;
    }

    bool operator==(const Density1D& o) const {
        return shape_ == o.shape_ && support_.lo == o.support_.lo && support_.hi == o.support_.hi;
    }

private:
    static constexpr int kCdfPanels = 512;
    static constexpr int kCdfOrder = 16;

    void validate_shape() const {
        if (const auto* p = std::get_if<PowerShape>(&shape_)) {
            if (!(p->a > 0.0)) throw PreconditionError("power density requires a > 0");
            if (support_.lo == 0.0 && p->b < 0.0) {
                throw PreconditionError("power density with b < 0 is unbounded at 0; use lo > 0");
            }
        } else if (const auto* e = std::get_if<TruncatedExponentialShape>(&shape_)) {
            if (e->lambda == 0.0) throw PreconditionError("truncated_exponential requires lambda != 0");
        } else if (const auto* pe = std::get_if<PolyExpShape>(&shape_)) {
            if (pe->coeffs.empty()) throw PreconditionError("poly_exp requires at least one polynomial coefficient");
        } else if (const auto* t = std::get_if<TabulatedShape>(&shape_)) {
            if (t->values.size() < 4) throw PreconditionError("tabulated density requires at least 4 samples");
            for (double v : t->values) {
                if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError("tabulated samples must be positive and finite");
            }
        }
    }

    [[nodiscard]] double raw(double x) const {
        switch (kind()) {
            case DensityKind::uniform: return 1.0;
            case DensityKind::power: {
                const auto& s = std::get<PowerShape>(shape_);
                return s.a * std::pow(x, s.b);
            }
            case DensityKind::truncated_exponential: {
                const double l = std::get<TruncatedExponentialShape>(shape_).lambda;
                return std::abs(l) * std::exp(-l * (x - support_.lo));
            }
            case DensityKind::poly_exp: {
                const auto& s = std::get<PolyExpShape>(shape_);
                return detail::polyval(s.coeffs, x) * std::exp(detail::polyval(s.exp_coeffs, x));
            }
            case DensityKind::tabulated: return hermite(x);
        }
        return 0.0;
    }

    [[nodiscard]] double raw_derivative(double x) const {
        switch (kind()) {
            case DensityKind::uniform: return 0.0;
            case DensityKind::power: {
                const auto& s = std::get<PowerShape>(shape_);
                if (s.b == 0.0) return 0.0;
                return s.a * s.b * std::pow(x, s.b - 1.0);
            }
            case DensityKind::truncated_exponential: {
                const double l = std::get<TruncatedExponentialShape>(shape_).lambda;
                return -l * raw(x);
            }
            case DensityKind::poly_exp: {
                const auto& s = std::get<PolyExpShape>(shape_);
                const double e = std::exp(detail::polyval(s.exp_coeffs, x));
                return (detail::polyder(s.coeffs, x) +
                        detail::polyval(s.coeffs, x) * detail::polyder(s.exp_coeffs, x)) * e;
            }
            case DensityKind::tabulated: return fd_derivative(x);
        }
        return 0.0;
    }

    // Central difference of the raw density, one-sided within h of an endpoint.
    [[nodiscard]] double fd_derivative(double x) const {
        const double h = 1e-6 * support_.width();
        const double a = std::max(support_.lo, x - h);
        const double b = std::min(support_.hi, x + h);
        return (raw(b) - raw(a)) / (b - a);
    }

    // Closed-form antiderivative of raw from lo where one exists.
    [[nodiscard]] std::optional<double> closed_form_cdf(double x) const {
        const double lo = support_.lo;
        switch (kind()) {
            case DensityKind::uniform: return x - lo;
            case DensityKind::power: {
                const auto& s = std::get<PowerShape>(shape_);
                if (s.b == -1.0) return s.a * std::log(x / lo);
                return s.a * (std::pow(x, s.b + 1.0) - std::pow(lo, s.b + 1.0)) / (s.b + 1.0);
            }
            case DensityKind::truncated_exponential: {
                const double l = std::get<TruncatedExponentialShape>(shape_).lambda;
                const double sign = l > 0 ? 1.0 : -1.0;
                return sign * -std::expm1(-l * (x - lo));
            }
            default: return std::nullopt;
        }
    }

    [[nodiscard]] double raw_cdf(double x) const {
        if (auto c = closed_form_cdf(x)) return *c;
        const double step = support_.width() / kCdfPanels;
        const int k = std::clamp(static_cast<int>((x - support_.lo) / step), 0, kCdfPanels - 1);
        const double left = support_.lo + k * step;
        return cumulative_[k] + integrate_1d([this](double s) { return raw(s); }, left, x, {kCdfOrder, 1});
    }

    void init_normalization() {
        if (auto* t = std::get_if<TabulatedShape>(&shape_)) init_hermite(*t);
        if (closed_form_cdf(support_.hi)) {
            norm_ = *closed_form_cdf(support_.hi);
        } else {
            const double step = support_.width() / kCdfPanels;
            cumulative_.assign(kCdfPanels + 1, 0.0);
            for (int k = 0; k < kCdfPanels; ++k) {
                const double a = support_.lo + k * step;
                const double b = (k == kCdfPanels - 1) ? support_.hi : a + step;
                cumulative_[k + 1] = cumulative_[k] + integrate_1d([this](double s) { return raw(s); }, a, b, {kCdfOrder, 1});
            }
            norm_ = cumulative_.back();
        }
        if (!(norm_ > 0.0) || !std::isfinite(norm_)) throw PreconditionError("density does not integrate to a positive finite mass");
    }

    void verify_positive() const {
        const int n = 257;
        for (int i = 0; i < n; ++i) {
            // Interior samples only; power densities may vanish at x = 0.
            const double x = support_.lo + support_.width() * (i + 0.5) / n;
            const double v = raw(x);
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw PreconditionError("density is not positive and finite at x = " + detail::fmt_point(x));
            }
        }
    }

    // Cubic Hermite through equally spaced samples; node slopes from
    // fourth-order differences (second order next to the ends).
    void init_hermite(const TabulatedShape& t) {
        const auto& v = t.values;
        const std::size_t n = v.size();
        const double h = support_.width() / static_cast<double>(n - 1);
        slopes_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= 2 && i + 2 < n) {
                slopes_[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
            } else if (i >= 1 && i + 1 < n) {
                slopes_[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            } else if (i == 0) {
                slopes_[i] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            } else {
                slopes_[i] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
            }
        }
    }

    [[nodiscard]] double hermite(double x) const {
        const auto& v = std::get<TabulatedShape>(shape_).values;
        const std::size_t n = v.size();
        const double h = support_.width() / static_cast<double>(n - 1);
        const double pos = (x - support_.lo) / h;
        const std::size_t k = std::min(n - 2, static_cast<std::size_t>(std::max(0.0, pos)));
        const double s = pos - static_cast<double>(k);
        const double s2 = s * s;
        const double s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * v[k] + (s3 - 2 * s2 + s) * h * slopes_[k] + (-2 * s3 + 3 * s2) * v[k + 1] +
               (s3 - s2) * h * slopes_[k + 1];
    }

    DensityShape shape_;
    Interval support_;
    double norm_ = 1.0;
    std::vector<double> cumulative_;
    std::vector<double> slopes_;
};

inline double power_rate(const Density1D& d, double x) { return d.power_rate(x); }

/// Independent valuations: f(x, y) = f1(x) f2(y) on V = supp(dx) x supp(dy).
struct ProductDistribution {
    Density1D dx;
    Density1D dy;

    [[nodiscard]] Rect rect() const { return {dx.support(), dy.support()}; }
    [[nodiscard]] double pdf(double x, double y) const { return dx.pdf(x) * dy.pdf(y); }
    [[nodiscard]] bool is_iid() const { return dx == dy; }
};

/// 3 f1 f2 + x f1' f2 + y f2' f1; the coefficient of interior utility in the
/// boundary revenue decomposition.
inline double delta(const ProductDistribution& d, double x, double y) {
    if (!d.dx.support().contains(x) || !d.dy.support().contains(y)) {
        throw DomainError("delta: (" + detail::fmt_point(x) + ", " + detail::fmt_point(y) + ") lies outside V");
    }
    const double f1 = d.dx.pdf(x);
    const double f2 = d.dy.pdf(y);
    return 3.0 * f1 * f2 + x * d.dx.pdf_derivative(x) * f2 + y * d.dy.pdf_derivative(y) * f1;
}

/// Same quantity through power rates: f (3 + PR1 + PR2).
inline double delta_factored(const ProductDistribution& d, double x, double y) {
    return d.pdf(x, y) * (3.0 + d.dx.power_rate(x) + d.dy.power_rate(y));
}

struct ConditionReport {
    int condition_id = 0;
    bool holds = false;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::optional<double> worst_x;
    std::optional<double> worst_y;
};

namespace detail {

inline std::vector<double> condition_grid(const Density1D& d, int n) { return linspace(d.lo(), d.hi(), n); }

inline void record(ConditionReport& r, double margin, std::optional<double> x, std::optional<double> y) {
    if (margin < r.worst_margin) {
        r.worst_margin = margin;
        r.worst_x = x;
        r.worst_y = y;
    }
}

// Largest opposing move among successive differences (0 if monotone).
inline std::pair<double, std::size_t> monotonicity_violation(const std::vector<double>& values) {
    double up = 0.0;
    double down = 0.0;
    std::size_t up_at = 0;
    std::size_t down_at = 0;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double diff = values[k + 1] - values[k];
        if (diff > up) {
            up = diff;
            up_at = k;
        }
        if (-diff > down) {
            down = -diff;
            down_at = k;
        }
    }
    return up < down ? std::pair{up, up_at} : std::pair{down, down_at};
}

}  // namespace detail

/// Grid certification of the power-rate conditions on V.
///  1: PR1 + PR2 <= -3     2: PR1 + PR2 >= -3     3: each PR constant
///  4: -2 <= PR1 <= yA f2(yA) - 2 and -2 <= PR2 <= xA f1(xA) - 2
///  5: each PR weakly monotone (opposing moves at most slope_tol)
inline ConditionReport check_condition(const ProductDistribution& d, int id, int grid_n = 64,
                                       const ToleranceConfig& tol = {}) {
    if (grid_n < 16) throw PreconditionError("check_condition requires grid_n >= 16");
    if (id < 1 || id > 5) throw PreconditionError("condition id must be in 1..5");
    ConditionReport r;
    r.condition_id = id;
    const auto xs = detail::condition_grid(d.dx, grid_n);
    const auto ys = detail::condition_grid(d.dy, grid_n);
    std::vector<double> pr1(xs.size());
    std::vector<double> pr2(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) pr1[i] = d.dx.power_rate(xs[i]);
    for (std::size_t j = 0; j < ys.size(); ++j) pr2[j] = d.dy.power_rate(ys[j]);

    switch (id) {
        case 1:
        case 2:
            for (std::size_t i = 0; i < xs.size(); ++i) {
                for (std::size_t j = 0; j < ys.size(); ++j) {
                    const double sum = pr1[i] + pr2[j];
                    detail::record(r, id == 1 ? -3.0 - sum : sum + 3.0, xs[i], ys[j]);
                }
            }
            break;
        case 3: {
            const auto [lo1, hi1] = std::minmax_element(pr1.begin(), pr1.end());
            const auto [lo2, hi2] = std::minmax_element(pr2.begin(), pr2.end());
            detail::record(r, -(*hi1 - *lo1), xs[hi1 - pr1.begin()], std::nullopt);
            detail::record(r, -(*hi2 - *lo2), std::nullopt, ys[hi2 - pr2.begin()]);
            break;
        }
        case 4: {
            const double cap1 = d.dy.lo() * d.dy.pdf(d.dy.lo()) - 2.0;
            const double cap2 = d.dx.lo() * d.dx.pdf(d.dx.lo()) - 2.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                detail::record(r, std::min(pr1[i] + 2.0, cap1 - pr1[i]), xs[i], std::nullopt);
            }
            for (std::size_t j = 0; j < ys.size(); ++j) {
                detail::record(r, std::min(pr2[j] + 2.0, cap2 - pr2[j]), std::nullopt, ys[j]);
            }
            break;
        }
        case 5: {
            const auto [v1, k1] = detail::monotonicity_violation(pr1);
            const auto [v2, k2] = detail::monotonicity_violation(pr2);
            detail::record(r, tol.slope_tol - v1, xs[k1], std::nullopt);
            detail::record(r, tol.slope_tol - v2, std::nullopt, ys[k2]);
            break;
        }
    }
    r.holds = r.worst_margin >= -tol.abs_tol;
    return r;
}

/// True iff G <= F everywhere on a common grid (within abs_tol) and G < F
/// somewhere by more than abs_tol, i.e. `g` first-order stochastically
/// dominates `f`.
inline bool fosd_dominates(const Density1D& g, const Density1D& f, int grid_n = 512, const ToleranceConfig& tol = {}) {
    const double lo = std::min(g.lo(), f.lo());
    const double hi = std::max(g.hi(), f.hi());
    bool strict = false;
    for (double x : linspace(lo, hi, std::max(grid_n, 2))) {
        const double gv = g.cdf(x);
        const double fv = f.cdf(x);
        if (gv > fv + tol.abs_tol) return false;
        if (gv < fv - tol.abs_tol) strict = true;
    }
    return strict;
}

}  // namespace menulab
