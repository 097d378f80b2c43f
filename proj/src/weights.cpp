#include "txmsm/weights.hpp"

#include "txmsm/cox.hpp"
#include "txmsm/design.hpp"
#include "txmsm/errors.hpp"
#include "txmsm/multinomial.hpp"
#include "txmsm/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

namespace txmsm {

std::string_view to_string(WeightKind kind) {
    switch (kind) {
    case WeightKind::iptw:
        return "iptw";
    case WeightKind::ipcw:
        return "ipcw";
    case WeightKind::combined:
        return "combined";
    case WeightKind::truncated:
        return "truncated";
    }
    return "unknown";
}

WeightPercentiles weight_percentiles(std::span<const double> values) {
    if (values.empty()) {
        throw InputError("EmptyWeights", "no weights to summarise");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    WeightPercentiles p;
    p.min = sorted.front();
    p.max = sorted.back();
    p.p005 = stats::quantile_sorted(sorted, 0.005);
    p.p995 = stats::quantile_sorted(sorted, 0.995);
    p.mean = stats::mean(values);
    return p;
}

namespace {

void finalise(WeightSeries &w) {
    w.extreme_rows.clear();
    for (std::size_t k = 0; k < w.values.size(); ++k) {
        const double v = w.values[k];
        if (!(std::isfinite(v) && v > 0.0)) {
            throw NumericalError("WeightUnderflow",
                                 fmt::format("{} weight for row {} is {}", to_string(w.kind),
                                             w.rows[k] + 1, v));
        }
        if (v > extreme_weight_threshold) {
            w.extreme_rows.push_back(w.rows[k]);
        }
    }
    if (!w.values.empty()) {
        w.percentiles = weight_percentiles(w.values);
    }
}

std::string arm_key(ArmCode arm) { return std::to_string(to_int(arm)); }

} // namespace

WeightSeries iptw_point(const Cohort &cohort, const IptwOptions &options) {
    const std::size_t n = cohort.n_subjects();
    std::vector<std::string> arm(n);
    std::vector<double> year(n);
    std::vector<std::string> abo(n);
    std::vector<std::string> hospital(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto &row = cohort.rows()[cohort.subject(s).begin];
        arm[s] = arm_key(row.arm);
        year[s] = row.transfusion_year_first;
        abo[s] = row.patient_abo_rh;
        hospital[s] = row.hospital;
    }
    const std::vector<std::string> order{arm_key(ArmCode::Reference),
                                         arm_key(ArmCode::ExposedEverPregnant),
                                         arm_key(ArmCode::OtherMixed)};

    DesignMatrix numerator_design(n);
    numerator_design.add_intercept();
    const auto numerator = fit_multinomial(numerator_design, arm, order);

    DesignMatrix denominator_design(n);
    denominator_design.add_intercept();
    if (options.year) {
        denominator_design.add_continuous("Transfusion_Year_first", year);
    }
    if (options.blood_group) {
        denominator_design.add_categorical("Patient_ABORh", abo, cohort.abo_levels());
    }
    if (options.hospital) {
        denominator_design.add_categorical("Hospital", hospital, cohort.hospital_levels());
    }
    const bool same_model = denominator_design.n_cols() == 1;
    std::vector<std::string> notes;
    auto fit_denominator = [&]() {
        try {
            return fit_multinomial(denominator_design, arm, order);
        } catch (const NumericalError &e) {
            if (e.code() != "SeparationDetected" || !(options.separation_ridge > 0.0)) {
                throw;
            }
            MultinomialOptions ridge;
            ridge.ridge = options.separation_ridge;
            notes.push_back(fmt::format(
                "treatment model separated; refitted with ridge penalty {}", ridge.ridge));
            return fit_multinomial(denominator_design, arm, order, ridge);
        }
    };
    const auto denominator = same_model ? numerator : fit_denominator();

    const Eigen::MatrixXd p_num = predict_probabilities(numerator, numerator_design);
    const Eigen::MatrixXd p_den =
        same_model ? p_num : predict_probabilities(denominator, denominator_design);

    std::unordered_map<std::string, Eigen::Index> column;
    for (std::size_t k = 0; k < numerator.categories.size(); ++k) {
        column.emplace(numerator.categories[k], static_cast<Eigen::Index>(k));
    }

    WeightSeries w;
    w.kind = WeightKind::iptw;
    w.rows.resize(cohort.n_rows());
    w.values.resize(cohort.n_rows());
    std::size_t low_probability = 0;
    double smallest = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto i = static_cast<Eigen::Index>(s);
        const auto k = column.at(arm[s]);
        const double value = p_num(i, k) / p_den(i, k);
        const double row_min = p_den.row(i).minCoeff();
        if (row_min < positivity_threshold) {
            ++low_probability;
        }
        smallest = std::min(smallest, row_min);
        const auto range = cohort.subject(s);
        for (std::size_t r = range.begin; r < range.end; ++r) {
            w.rows[r] = r;
            w.values[r] = value;
        }
    }
    w.warnings = std::move(notes);
    for (const auto &msg : denominator.warnings) {
        w.warnings.push_back("treatment model: " + msg);
    }
    if (low_probability > 0) {
        w.warnings.push_back(fmt::format(
            "PositivityWarning: {} subject(s) have a fitted treatment probability below {} "
            "(smallest {:.3g})",
            low_probability, positivity_threshold, smallest));
    }
    finalise(w);
    return w;
}

WeightSeries ipcw_survival(const Cohort &cohort, std::span<const std::size_t> rows,
                           std::span<const double> prior) {
    if (rows.size() != prior.size()) {
        throw InputError("AlignmentMismatch",
                         fmt::format("{} prior weights for {} rows", prior.size(), rows.size()));
    }
    WeightSeries w;
    w.kind = WeightKind::ipcw;
    w.rows.assign(rows.begin(), rows.end());
    w.values.assign(rows.size(), 1.0);
    const auto &all = cohort.rows();
    const bool any_censoring =
        std::any_of(rows.begin(), rows.end(), [&](std::size_t r) { return all.at(r).censored; });
    if (!any_censoring) {
        finalise(w);
        return w;
    }

    SurvivalData numerator_data;
    const std::size_t n = rows.size();
    numerator_data.start.reserve(n);
    numerator_data.stop.reserve(n);
    numerator_data.event.reserve(n);
    numerator_data.weight.assign(prior.begin(), prior.end());
    numerator_data.stratum.assign(n, 0);
    numerator_data.cluster.reserve(n);
    std::unordered_map<std::size_t, int> cluster_id;
    Eigen::MatrixXd count(static_cast<Eigen::Index>(n), 1);
    for (std::size_t k = 0; k < n; ++k) {
        const auto &row = all[rows[k]];
        numerator_data.start.push_back(row.t_begin);
        numerator_data.stop.push_back(row.t_end);
        numerator_data.event.push_back(row.censored ? 1 : 0);
        const auto subject = cohort.subject_of_row()[rows[k]];
        numerator_data.cluster.push_back(
            cluster_id.emplace(subject, static_cast<int>(cluster_id.size())).first->second);
        count(static_cast<Eigen::Index>(k), 0) = row.arm_total_cum;
    }
    numerator_data.n_clusters = static_cast<int>(cluster_id.size());
    numerator_data.x.resize(static_cast<Eigen::Index>(n), 0);

    SurvivalData denominator_data = numerator_data;
    denominator_data.x = std::move(count);
    denominator_data.covariate_names = {"Arm_Total_cum"};

    const CoxFit numerator = fit_cox(numerator_data);
    const CoxFit denominator = fit_cox(denominator_data);
    const auto &h_num = numerator.baseline_hazard.front();
    const auto &h_den = denominator.baseline_hazard.front();
    const double beta = denominator.beta(0);

    // Cumulative hazards accumulate along each subject's rows, which are
    // contiguous and time-ordered in the cohort.
    double cum_den = 0.0;
    std::size_t current = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < n; ++k) {
        const auto &row = all[rows[k]];
        const auto subject = cohort.subject_of_row()[rows[k]];
        if (subject != current) {
            current = subject;
            cum_den = 0.0;
        }
        cum_den += (h_den.at(row.t_end) - h_den.at(row.t_begin)) *
                   std::exp(beta * row.arm_total_cum);
        const double cum_num = h_num.at(row.t_end) - h_num.at(grid::origin);
        w.values[k] = std::exp(cum_den - cum_num);
    }
    for (const auto &msg : denominator.warnings) {
        w.warnings.push_back("censoring model: " + msg);
    }
    finalise(w);
    return w;
}

WeightSeries subset_rows(const WeightSeries &w, std::span<const std::size_t> rows) {
    std::unordered_map<std::size_t, std::size_t> position;
    position.reserve(w.rows.size());
    for (std::size_t k = 0; k < w.rows.size(); ++k) {
        position.emplace(w.rows[k], k);
    }
    WeightSeries out;
    out.kind = w.kind;
    out.truncation_cap = w.truncation_cap;
    out.warnings = w.warnings;
    out.rows.assign(rows.begin(), rows.end());
    out.values.reserve(rows.size());
    for (std::size_t r : rows) {
        const auto it = position.find(r);
        if (it == position.end()) {
            throw InputError("AlignmentMismatch",
                             fmt::format("{} weights do not cover row {}", to_string(w.kind), r + 1));
        }
        out.values.push_back(w.values[it->second]);
    }
    finalise(out);
    return out;
}

WeightSeries truncate(const WeightSeries &w, double cap) {
    if (!(cap > 0.0)) {
        throw InputError("InvalidCap", fmt::format("truncation cap must be positive, got {}", cap));
    }
    WeightSeries out = w;
    out.kind = WeightKind::truncated;
    out.truncation_cap = cap;
    if (!out.untruncated_percentiles) {
        out.untruncated_percentiles = w.percentiles;
    }
    for (double &v : out.values) {
        v = std::min(v, cap);
    }
    // Extreme rows keep referring to the untruncated values.
    auto extreme = w.extreme_rows;
    finalise(out);
    out.extreme_rows = std::move(extreme);
    return out;
}

WeightSeries combine_and_truncate(const WeightSeries &iptw, const WeightSeries &ipcw,
                                  std::optional<double> cap) {
    if (iptw.rows != ipcw.rows || iptw.values.size() != ipcw.values.size()) {
        throw InputError("AlignmentMismatch",
                         fmt::format("cannot combine {} and {} weights over different rows",
                                     to_string(iptw.kind), to_string(ipcw.kind)));
    }
    WeightSeries out;
    out.kind = WeightKind::combined;
    out.rows = iptw.rows;
    out.values.resize(iptw.values.size());
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        out.values[k] = iptw.values[k] * ipcw.values[k];
    }
    out.warnings = iptw.warnings;
    out.warnings.insert(out.warnings.end(), ipcw.warnings.begin(), ipcw.warnings.end());
    finalise(out);
    if (cap) {
        return truncate(out, *cap);
    }
    return out;
}

std::vector<WeightBin> weight_distribution_by_time(const WeightSeries &w, const Cohort &cohort,
                                                   int binwidth, int horizon) {
    if (binwidth < 1) {
        throw InputError("InvalidBinwidth", fmt::format("binwidth must be >= 1, got {}", binwidth));
    }
    if (horizon < 1) {
        throw InputError("InvalidHorizon", fmt::format("horizon must be >= 1, got {}", horizon));
    }
    const int n_bins = (horizon + binwidth - 1) / binwidth;
    std::vector<std::vector<double>> values(static_cast<std::size_t>(n_bins));
    for (std::size_t k = 0; k < w.rows.size(); ++k) {
        const int t = cohort.rows().at(w.rows[k]).t_end;
        if (t <= 0 || t > n_bins * binwidth) {
            continue;
        }
        values[static_cast<std::size_t>((t - 1) / binwidth)].push_back(w.values[k]);
    }
    std::vector<WeightBin> bins;
    bins.reserve(values.size());
    for (int b = 0; b < n_bins; ++b) {
        auto &v = values[static_cast<std::size_t>(b)];
        WeightBin bin;
        bin.lower = b * binwidth;
        bin.upper = (b + 1) * binwidth;
        bin.count = v.size();
        if (!v.empty()) {
            std::sort(v.begin(), v.end());
            bin.min = v.front();
            bin.q1 = stats::quantile_sorted(v, 0.25);
            bin.median = stats::quantile_sorted(v, 0.5);
            bin.q3 = stats::quantile_sorted(v, 0.75);
            bin.max = v.back();
        }
        bins.push_back(bin);
    }
    return bins;
}

void write_weight_bins(std::ostream &out, std::span<const WeightBin> bins) {
    auto cell = [](const std::optional<double> &v) {
        return v ? fmt::format("{:.10g}", *v) : std::string{};
    };
    out << "bin,count,min,q1,median,q3,max\n";
    for (const auto &b : bins) {
        out << fmt::format("{}-{},{},{},{},{},{},{}\n", b.lower, b.upper, b.count, cell(b.min),
                           cell(b.q1), cell(b.median), cell(b.q3), cell(b.max));
    }
}

} // namespace txmsm
