#include "txmsm/pipelines.hpp"

#include "txmsm/cox.hpp"
#include "txmsm/design.hpp"
#include "txmsm/errors.hpp"
#include "txmsm/spline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <unordered_map>

namespace txmsm {

std::string_view to_string(Method method) {
    switch (method) {
    case Method::restriction:
        return "restriction";
    case Method::time_varying:
        return "time_varying";
    case Method::ipw_msm:
        return "ipw_msm";
    }
    return "unknown";
}

std::string_view method_label(Method method) {
    switch (method) {
    case Method::restriction:
        return "Restriction";
    case Method::time_varying:
        return "Time-varying";
    case Method::ipw_msm:
        return "IPW-MSM";
    }
    return "?";
}

std::vector<std::size_t> comparison_rows(const Cohort &cohort) {
    std::vector<std::size_t> rows;
    rows.reserve(cohort.n_rows());
    for (std::size_t r = 0; r < cohort.n_rows(); ++r) {
        if (cohort.rows()[r].arm != ArmCode::OtherMixed) {
            rows.push_back(r);
        }
    }
    return rows;
}

namespace {

constexpr const char *exposure_name = "Arm";

/// One model record per entry, pointing back at a cohort row for covariates.
struct Records {
    std::vector<std::size_t> row;
    std::vector<double> start;
    std::vector<double> stop;
    std::vector<std::uint8_t> event;
    std::vector<double> weight;

    void push(std::size_t r, double t0, double t1, bool e, double w = 1.0) {
        row.push_back(r);
        start.push_back(t0);
        stop.push_back(t1);
        event.push_back(e ? 1 : 0);
        weight.push_back(w);
    }
    std::size_t size() const { return row.size(); }
};

void add_baseline_covariates(DesignMatrix &design, const Cohort &cohort, const Records &rec,
                             const PipelineConfig &config) {
    const auto &all = cohort.rows();
    if (config.hospital) {
        std::vector<std::string> labels;
        labels.reserve(rec.size());
        for (auto r : rec.row) {
            labels.push_back(all[r].hospital);
        }
        design.add_categorical("Hospital", labels, cohort.hospital_levels());
    }
    if (config.blood_group) {
        std::vector<std::string> labels;
        labels.reserve(rec.size());
        for (auto r : rec.row) {
            labels.push_back(all[r].patient_abo_rh);
        }
        design.add_categorical("Patient_ABORh", labels, cohort.abo_levels());
    }
    if (config.year) {
        std::vector<std::string> levels;
        for (int y : cohort.year_levels()) {
            levels.push_back(std::to_string(y));
        }
        std::vector<std::string> labels;
        labels.reserve(rec.size());
        for (auto r : rec.row) {
            labels.push_back(std::to_string(all[r].transfusion_year_first));
        }
        design.add_categorical("Transfusion_Year_first", labels, levels);
    }
}

void add_exposure(DesignMatrix &design, const Cohort &cohort, const Records &rec) {
    std::vector<double> arm;
    arm.reserve(rec.size());
    for (auto r : rec.row) {
        arm.push_back(cohort.rows()[r].arm == ArmCode::ExposedEverPregnant ? 1.0 : 0.0);
    }
    design.add_continuous(exposure_name, arm);
}

SurvivalData survival_data(const Cohort &cohort, Records rec, const DesignMatrix &design) {
    SurvivalData d;
    const std::size_t n = rec.size();
    d.start = std::move(rec.start);
    d.stop = std::move(rec.stop);
    d.event = std::move(rec.event);
    d.weight = std::move(rec.weight);
    d.stratum.assign(n, 0);
    d.cluster.reserve(n);
    std::unordered_map<std::string, int> ids;
    for (auto r : rec.row) {
        const auto &label = cohort.cluster(cohort.subject_of_row()[r]);
        d.cluster.push_back(ids.emplace(label, static_cast<int>(ids.size())).first->second);
    }
    d.n_clusters = static_cast<int>(ids.size());
    d.x = design.to_matrix();
    d.covariate_names = design.names();
    return d;
}

void count_subjects(AnalysisReport &report, const Cohort &cohort, const Records &rec) {
    for (auto arm : {ArmCode::Reference, ArmCode::ExposedEverPregnant}) {
        report.deaths_by_arm[arm] = 0;
        report.recipients_by_arm[arm] = 0;
    }
    std::size_t last_subject = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const auto r = rec.row[k];
        const auto &row = cohort.rows()[r];
        const auto subject = cohort.subject_of_row()[r];
        if (subject != last_subject) {
            ++report.recipients_by_arm[row.arm];
            last_subject = subject;
        }
        if (rec.event[k]) {
            ++report.deaths_by_arm[row.arm];
        }
    }
}

AnalysisReport fit_and_report(Method method, const Cohort &cohort, Records rec,
                              const DesignMatrix &design, const PipelineConfig &config) {
    AnalysisReport report;
    report.method = method;
    count_subjects(report, cohort, rec);
    CoxOptions options;
    options.small_sample_correction = config.small_sample_correction;
    options.drop_divergent_columns = true;
    const auto data = survival_data(cohort, std::move(rec), design);
    const CoxFit fit = fit_cox(data, options);
    const auto j = fit.index_of(exposure_name);
    if (fit.divergent[static_cast<std::size_t>(j)]) {
        throw NumericalError("MonotoneLikelihood", "the arm coefficient diverges");
    }
    if (fit.aliased[static_cast<std::size_t>(j)]) {
        throw NumericalError("ExposureNotEstimable",
                             "the arm effect is not identifiable (only one arm has follow-up)");
    }
    report.log_hr = fit.beta(j);
    report.robust_se = fit.robust_se()(j);
    report.naive_se = fit.naive_se()(j);
    const auto ci = wald_interval(report.log_hr, report.robust_se);
    report.hr = ci.hr;
    report.ci_low = ci.lower;
    report.ci_high = ci.upper;
    report.n_records = fit.n_records;
    report.n_events = fit.n_events;
    report.n_iterations = fit.n_iterations;
    report.converged = fit.converged;
    for (const auto &w : fit.warnings) {
        report.notes.push_back("outcome model: " + w);
    }
    return report;
}

} // namespace

AnalysisReport run_restriction(const Cohort &cohort, const PipelineConfig &config) {
    Records rec;
    for (std::size_t s = 0; s < cohort.n_subjects(); ++s) {
        const auto &last = cohort.final_row(s);
        if (last.arm == ArmCode::OtherMixed || last.censored) {
            continue;
        }
        rec.push(cohort.subject(s).end - 1, 0.0, last.t_end_new, last.death);
    }
    if (rec.size() == 0) {
        throw InputError("NoAdherentSubjects",
                         "no subject in arms 0/1 stayed with their initial exposure category");
    }
    DesignMatrix design(rec.size());
    add_exposure(design, cohort, rec);
    add_baseline_covariates(design, cohort, rec, config);
    return fit_and_report(Method::restriction, cohort, std::move(rec), design, config);
}

AnalysisReport run_time_varying(const Cohort &cohort, const PipelineConfig &config) {
    Records rec;
    for (auto r : comparison_rows(cohort)) {
        const auto &row = cohort.rows()[r];
        rec.push(r, row.t_begin, row.t_end_new, row.death);
    }
    if (rec.size() == 0) {
        throw InputError("NoAnalysisRows", "the cohort has no subjects in arms 0/1");
    }
    std::vector<double> count;
    count.reserve(rec.size());
    for (auto r : rec.row) {
        count.push_back(cohort.rows()[r].arm_total_cum);
    }
    DesignMatrix design(rec.size());
    add_exposure(design, cohort, rec);
    std::vector<std::string> notes;
    std::vector<std::vector<double>> spline_terms;
    std::vector<std::string> spline_names;
    try {
        auto basis = rcs_basis(count);
        spline_names = {"Arm_Total_cum", "Arm_Total_cum'"};
        spline_terms = {std::move(basis.linear), std::move(basis.nonlinear)};
        design.add_spline_column(spline_names[0], spline_terms[0]);
        design.add_spline_column(spline_names[1], spline_terms[1]);
    } catch (const InputError &e) {
        if (e.code() != "DegenerateKnots") {
            throw;
        }
        notes.push_back(fmt::format("spline reduced to a linear Arm_Total_cum term ({})", e.what()));
        spline_names = {"Arm_Total_cum"};
        spline_terms = {count};
        design.add_continuous(spline_names[0], spline_terms[0]);
    }
    add_baseline_covariates(design, cohort, rec, config);
    if (config.spline_hospital_interaction && config.hospital) {
        const auto &levels = cohort.hospital_levels();
        for (std::size_t h = 1; h < levels.size(); ++h) {
            for (std::size_t t = 0; t < spline_terms.size(); ++t) {
                std::vector<double> v(rec.size());
                for (std::size_t k = 0; k < rec.size(); ++k) {
                    v[k] = cohort.rows()[rec.row[k]].hospital == levels[h] ? spline_terms[t][k] : 0.0;
                }
                design.add_continuous(fmt::format("{}:Hospital={}", spline_names[t], levels[h]), v);
            }
        }
    }
    auto report = fit_and_report(Method::time_varying, cohort, std::move(rec), design, config);
    report.notes.insert(report.notes.begin(), notes.begin(), notes.end());
    return report;
}

AnalysisReport run_ipw_msm(const Cohort &cohort, const PipelineConfig &config) {
    const WeightSeries iptw_all = iptw_point(cohort, config.iptw);
    const auto rows = comparison_rows(cohort);
    if (rows.empty()) {
        throw InputError("NoAnalysisRows", "the cohort has no subjects in arms 0/1");
    }
    const WeightSeries iptw = subset_rows(iptw_all, rows);
    const WeightSeries ipcw = ipcw_survival(cohort, rows, iptw.values);
    const WeightSeries combined = combine_and_truncate(iptw, ipcw, config.truncation_cap);

    Records rec;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto &row = cohort.rows()[rows[k]];
        if (row.censored) {
            continue;
        }
        rec.push(rows[k], row.t_begin, row.t_end_new, row.death, combined.values[k]);
    }
    if (rec.size() == 0) {
        throw InputError("NoAnalysisRows", "every arm 0/1 row is censored");
    }
    DesignMatrix design(rec.size());
    add_exposure(design, cohort, rec);
    auto report = fit_and_report(Method::ipw_msm, cohort, std::move(rec), design, config);
    report.weight_percentiles = combined.percentiles;
    report.untruncated_weight_percentiles = combined.untruncated_percentiles;
    report.truncation_cap = combined.truncation_cap;
    report.n_extreme_weights = combined.extreme_rows.size();
    std::vector<std::string> notes = iptw_all.warnings;
    notes.insert(notes.end(), ipcw.warnings.begin(), ipcw.warnings.end());
    if (!combined.extreme_rows.empty()) {
        notes.push_back(fmt::format("{} row(s) carry a combined weight above {} (retained)",
                                    combined.extreme_rows.size(), extreme_weight_threshold));
    }
    report.notes.insert(report.notes.begin(), notes.begin(), notes.end());
    return report;
}

AnalysisReport run_method(Method method, const Cohort &cohort, const PipelineConfig &config) {
    switch (method) {
    case Method::restriction:
        return run_restriction(cohort, config);
    case Method::time_varying:
        return run_time_varying(cohort, config);
    case Method::ipw_msm:
        return run_ipw_msm(cohort, config);
    }
    throw InputError("UnknownMethod", "unknown analysis method");
}

} // namespace txmsm
