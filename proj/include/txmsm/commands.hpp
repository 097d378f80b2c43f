#pragma once

#include "txmsm/pipelines.hpp"
#include "txmsm/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace txmsm {

inline constexpr int exit_success = 0;
inline constexpr int exit_internal = 1;
inline constexpr int exit_input = 2;
inline constexpr int exit_numerical = 3;

struct RunConfig {
    std::string command;
    std::string input;
    std::string output_dir = ".";
    /// restriction | timevarying | ipw | all
    std::string method = "all";
    std::optional<double> truncate;
    std::optional<std::uint64_t> seed;
    std::string scenario;
    std::size_t replications = 1;
    int binwidth = 1;
    int horizon = 28;
    std::vector<std::string> permute_columns{"Arm"};
    PipelineConfig pipeline;
};

std::vector<Method> parse_methods(const std::string &name);

/// Each command writes its files under config.output_dir and a short human
/// summary to `out`; failures propagate as txmsm::Error.
void cmd_analyze(const RunConfig &config, std::ostream &out);
void cmd_simulate(const RunConfig &config, std::ostream &out);
void cmd_anonymize(const RunConfig &config, std::ostream &out);
void cmd_diagnose(const RunConfig &config, std::ostream &out);
void cmd_compare(const RunConfig &config, std::ostream &out);

/// Dispatches on config.command and maps errors to exit statuses: 0 success,
/// 2 input/validation, 3 numerical failure.
int run_command(const RunConfig &config, std::ostream &out, std::ostream &err);

/// Scenario used by simulate/compare: the file if given, else the default,
/// with the seed override applied.
SimScenario resolve_scenario(const RunConfig &config);

struct MethodSummary {
    Method method = Method::restriction;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    double mean_log_hr = 0.0;
    double empirical_se = 0.0;
    double mean_robust_se = 0.0;
    double coverage = 0.0;
};

struct ReplicateResult {
    std::uint64_t seed = 0;
    /// One entry per method, empty when that fit failed.
    std::vector<std::optional<AnalysisReport>> reports;
    std::vector<std::string> failures;
};

struct ComparisonStudy {
    double true_log_hr = 0.0;
    std::string scenario_hash;
    std::vector<ReplicateResult> replicates;
    std::vector<MethodSummary> summaries;
};

/// R replications of simulate -> all three analyses; replicate r uses a seed
/// derived from (base seed, r).
ComparisonStudy run_comparison(const SimScenario &scenario, std::size_t replications,
                               const PipelineConfig &config = {});

std::uint64_t replicate_seed(std::uint64_t base, std::size_t replicate);

} // namespace txmsm
