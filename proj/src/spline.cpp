#include "txmsm/spline.hpp"

#include "txmsm/errors.hpp"
#include "txmsm/stats.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace txmsm {

SplineKnots default_spline_knots(std::span<const double> x) {
    if (x.empty()) {
        throw InputError("DegenerateKnots", "cannot place knots on an empty sample");
    }
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    return {stats::quantile_sorted(sorted, 0.10), stats::quantile_sorted(sorted, 0.50),
            stats::quantile_sorted(sorted, 0.90)};
}

double rcs_nonlinear_term(double x, const SplineKnots &k) {
    auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
    const double span = k[2] - k[0];
    const double value = cube_plus(x - k[0]) - cube_plus(x - k[1]) * (k[2] - k[0]) / (k[2] - k[1]) +
                         cube_plus(x - k[2]) * (k[1] - k[0]) / (k[2] - k[1]);
    return value / (span * span);
}

SplineColumns rcs_basis(std::span<const double> x, std::optional<SplineKnots> knots) {
    SplineColumns out;
    out.knots = knots ? *knots : default_spline_knots(x);
    const auto &k = out.knots;
    if (!(k[0] < k[1] && k[1] < k[2])) {
        throw InputError("DegenerateKnots",
                         fmt::format("knots ({}, {}, {}) are not strictly increasing", k[0], k[1],
                                     k[2]));
    }
    out.linear.assign(x.begin(), x.end());
    out.nonlinear.reserve(x.size());
    for (double v : x) {
        out.nonlinear.push_back(rcs_nonlinear_term(v, k));
    }
    return out;
}

} // namespace txmsm
