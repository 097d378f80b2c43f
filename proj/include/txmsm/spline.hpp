#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace txmsm {

using SplineKnots = std::array<double, 3>;

/// Knots at the 10th, 50th and 90th type-7 percentiles of `x`.
SplineKnots default_spline_knots(std::span<const double> x);

/// Restricted cubic spline with three knots: returns the linear column and the
/// single nonlinear column (normalised by the squared outer-knot span), which is
/// zero up to the first knot and linear beyond the last. Throws InputError
/// DegenerateKnots unless the knots strictly increase.
struct SplineColumns {
    SplineKnots knots{};
    std::vector<double> linear;
    std::vector<double> nonlinear;
};

SplineColumns rcs_basis(std::span<const double> x, std::optional<SplineKnots> knots = std::nullopt);

/// Nonlinear term at a single point.
double rcs_nonlinear_term(double x, const SplineKnots &knots);

} // namespace txmsm
