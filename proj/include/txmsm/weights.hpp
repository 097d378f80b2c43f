#pragma once

#include "txmsm/data_model.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace txmsm {

enum class WeightKind { iptw, ipcw, combined, truncated };

std::string_view to_string(WeightKind kind);

struct WeightPercentiles {
    double min = 0.0;
    double p005 = 0.0;
    double p995 = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

/// min, 0.5th / 99.5th type-7 percentiles, max and mean. Throws on empty input.
WeightPercentiles weight_percentiles(std::span<const double> values);

/// Weights on a set of cohort rows: values[k] belongs to cohort row rows[k].
struct WeightSeries {
    WeightKind kind = WeightKind::iptw;
    std::vector<std::size_t> rows;
    std::vector<double> values;
    std::optional<double> truncation_cap;
    WeightPercentiles percentiles;
    /// Set on truncated series: the distribution before capping.
    std::optional<WeightPercentiles> untruncated_percentiles;
    /// Rows whose (untruncated) weight exceeds the extreme-weight threshold.
    std::vector<std::size_t> extreme_rows;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return values.size(); }
};

inline constexpr double extreme_weight_threshold = 10.0;
inline constexpr double positivity_threshold = 1e-3;

struct IptwOptions {
    bool year = true;
    bool blood_group = true;
    bool hospital = true;
    /// Ridge penalty for a refit when the denominator model separates
    /// (e.g. a sparse blood group with no subject in some arm); 0 disables.
    double separation_ridge = 1e-3;
};

/// Stabilized point-treatment weights P(A = a) / P(A = a | L) from two
/// multinomial fits on one baseline record per subject, over all arm codes,
/// broadcast to every row. Year enters the denominator as a continuous term.
WeightSeries iptw_point(const Cohort &cohort, const IptwOptions &options = {});

/// Stabilized censoring weights on `rows` (normally arms 0 and 1): per row,
/// S_num(t_end) / S_den(t_end | arm_total_cum path), from two Cox models of the
/// censoring hazard (numerator without covariates, denominator on
/// Arm_Total_cum) weighted by `prior`, which must be aligned to `rows`.
WeightSeries ipcw_survival(const Cohort &cohort, std::span<const std::size_t> rows,
                           std::span<const double> prior);

/// The part of `w` that falls on `rows`. Throws AlignmentMismatch when a row
/// is not covered.
WeightSeries subset_rows(const WeightSeries &w, std::span<const std::size_t> rows);

/// Elementwise product, then optional capping. Throws AlignmentMismatch.
WeightSeries combine_and_truncate(const WeightSeries &iptw, const WeightSeries &ipcw,
                                  std::optional<double> cap = std::nullopt);

/// Caps values at `cap` (> 0; +inf leaves values untouched).
WeightSeries truncate(const WeightSeries &w, double cap);

struct WeightBin {
    int lower = 0;
    int upper = 0;
    std::size_t count = 0;
    /// Absent when the bin is empty.
    std::optional<double> min, q1, median, q3, max;
};

/// Distribution of weights by row end time over bins (b*w, (b+1)*w] covering
/// (0, horizon].
std::vector<WeightBin> weight_distribution_by_time(const WeightSeries &w, const Cohort &cohort,
                                                   int binwidth = 1, int horizon = 28);

void write_weight_bins(std::ostream &out, std::span<const WeightBin> bins);

} // namespace txmsm
