#pragma once

#include "txmsm/pipelines.hpp"

#include <json.hpp>

#include <span>
#include <string>

namespace txmsm {

/// "1.22 (1.05-1.42)"
std::string format_hr_ci(double hr, double low, double high);

/// Thousands separators: 10901 -> "10,901".
std::string format_count(std::size_t n);

/// Table-2 layout: one block per method with a reference and an exposed row.
std::string render_table2(std::span<const AnalysisReport> reports);

nlohmann::ordered_json to_json(const WeightPercentiles &p);
nlohmann::ordered_json to_json(const AnalysisReport &report);

} // namespace txmsm
