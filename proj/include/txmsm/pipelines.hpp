#pragma once

#include "txmsm/data_model.hpp"
#include "txmsm/weights.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace txmsm {

enum class Method { restriction, time_varying, ipw_msm };

inline constexpr Method all_methods[] = {Method::restriction, Method::time_varying,
                                         Method::ipw_msm};

/// Machine name ("restriction", "time_varying", "ipw_msm").
std::string_view to_string(Method method);
/// Row label used in the Table-2 style rendering.
std::string_view method_label(Method method);

/// Covariate toggles and weighting options shared by the three analyses.
struct PipelineConfig {
    bool hospital = true;
    bool blood_group = true;
    bool year = true;
    /// Adds the spline x hospital interaction to the time-varying model.
    bool spline_hospital_interaction = false;
    IptwOptions iptw;
    std::optional<double> truncation_cap;
    /// G / (G - 1) factor on the cluster-robust covariance.
    bool small_sample_correction = false;
};

struct AnalysisReport {
    Method method = Method::restriction;
    /// Exposure coefficient (arm 1 vs arm 0) and its standard errors.
    double log_hr = 0.0;
    double robust_se = 0.0;
    double naive_se = 0.0;
    double hr = 1.0;
    double ci_low = 1.0;
    double ci_high = 1.0;
    std::map<ArmCode, std::size_t> deaths_by_arm;
    std::map<ArmCode, std::size_t> recipients_by_arm;
    std::size_t n_records = 0;
    std::size_t n_events = 0;
    int n_iterations = 0;
    bool converged = false;
    std::optional<WeightPercentiles> weight_percentiles;
    std::optional<WeightPercentiles> untruncated_weight_percentiles;
    std::optional<double> truncation_cap;
    std::size_t n_extreme_weights = 0;
    std::vector<std::string> notes;
};

/// Subjects who never switched, one record (0, final t_end_new] each, Cox on
/// arm plus categorical hospital, blood group and year. Throws InputError
/// NoAdherentSubjects.
AnalysisReport run_restriction(const Cohort &cohort, const PipelineConfig &config = {});

/// Counting-process Cox on arm, a 3-knot restricted cubic spline of
/// Arm_Total_cum and categorical baseline covariates; switchers leave the risk
/// set at t_end_new without an event.
AnalysisReport run_time_varying(const Cohort &cohort, const PipelineConfig &config = {});

/// IPTW (all arms) -> arms 0/1 -> IPCW -> combined (optionally capped) weights
/// -> weighted Cox of death on arm over uncensored rows.
AnalysisReport run_ipw_msm(const Cohort &cohort, const PipelineConfig &config = {});

AnalysisReport run_method(Method method, const Cohort &cohort, const PipelineConfig &config = {});

/// Rows of subjects in arm 0 or 1, in cohort order.
std::vector<std::size_t> comparison_rows(const Cohort &cohort);

} // namespace txmsm
