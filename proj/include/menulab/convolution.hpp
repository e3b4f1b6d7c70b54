#pragma once

#include "menulab/distributions.hpp"
#include "menulab/numerics.hpp"

#include <algorithm>
#include <vector>

namespace menulab {

/// P(x + y <= p) for independent marginals: the integral of F2(p - x) f1(x)
/// over the x-support. The integrand has kinks where p - x crosses the
/// y-support endpoints, so those points split the quadrature.
inline double bundle_cdf(const ProductDistribution& d, double p, const QuadratureSpec& spec = {16, 16}) {
    const double xlo = d.dx.lo();
    const double xhi = d.dx.hi();
    if (p <= xlo + d.dy.lo()) return 0.0;
    if (p >= xhi + d.dy.hi()) return 1.0;
    std::vector<double> cuts{xlo, xhi};
    for (double c : {p - d.dy.lo(), p - d.dy.hi()}) {
        if (c > xlo && c < xhi) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        total += integrate_1d([&](double x) { return d.dy.cdf(p - x) * d.dx.pdf(x); }, cuts[k], cuts[k + 1], spec);
    }
    return std::clamp(total, 0.0, 1.0);
}

}  // namespace menulab
