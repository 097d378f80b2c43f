#pragma once

#include <span>
#include <vector>

namespace txmsm::stats {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default). `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Convenience overload that copies and sorts.
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sd(std::span<const double> values);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

} // namespace txmsm::stats
