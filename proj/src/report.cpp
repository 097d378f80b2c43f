#include "txmsm/report.hpp"

#include <fmt/format.h>

#include <iterator>

namespace txmsm {

std::string format_hr_ci(double hr, double low, double high) {
    return fmt::format("{:.2f} ({:.2f}-{:.2f})", hr, low, high);
}

std::string format_count(std::size_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    const std::size_t lead = digits.size() % 3 == 0 ? 3 : digits.size() % 3;
    out.append(digits, 0, lead);
    for (std::size_t i = lead; i < digits.size(); i += 3) {
        out.push_back(',');
        out.append(digits, i, 3);
    }
    return out;
}

std::string render_table2(std::span<const AnalysisReport> reports) {
    std::string out;
    auto line = [&out](std::string_view method, std::string_view arm, const std::string &deaths,
                       const std::string &recipients, const std::string &hr) {
        fmt::format_to(std::back_inserter(out), "{:<14}{:<24}{:>15}{:>19}  {}\n", method, arm,
                       deaths, recipients, hr);
    };
    line("Method", "Arm", "No. of Deaths", "No. of Recipients", "HR (95% CI)");
    for (const auto &r : reports) {
        auto count = [](const std::map<ArmCode, std::size_t> &m, ArmCode arm) {
            const auto it = m.find(arm);
            return format_count(it == m.end() ? 0 : it->second);
        };
        line(method_label(r.method), arm_label(ArmCode::Reference),
             count(r.deaths_by_arm, ArmCode::Reference),
             count(r.recipients_by_arm, ArmCode::Reference), "1 (reference)");
        line("", arm_label(ArmCode::ExposedEverPregnant),
             count(r.deaths_by_arm, ArmCode::ExposedEverPregnant),
             count(r.recipients_by_arm, ArmCode::ExposedEverPregnant),
             format_hr_ci(r.hr, r.ci_low, r.ci_high));
    }
    return out;
}

nlohmann::ordered_json to_json(const WeightPercentiles &p) {
    return {{"min", p.min}, {"p005", p.p005}, {"p995", p.p995}, {"max", p.max}, {"mean", p.mean}};
}

nlohmann::ordered_json to_json(const AnalysisReport &r) {
    nlohmann::ordered_json j;
    j["method"] = std::string(to_string(r.method));
    j["log_hr"] = r.log_hr;
    j["robust_se"] = r.robust_se;
    j["naive_se"] = r.naive_se;
    j["hr"] = r.hr;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["hr_ci"] = format_hr_ci(r.hr, r.ci_low, r.ci_high);
    for (const auto &[key, counts] :
         {std::pair{"deaths_by_arm", &r.deaths_by_arm}, std::pair{"recipients_by_arm", &r.recipients_by_arm}}) {
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto &[arm, n] : *counts) {
            m[std::to_string(to_int(arm))] = n;
        }
        j[key] = m;
    }
    j["n_records"] = r.n_records;
    j["n_events"] = r.n_events;
    j["n_iterations"] = r.n_iterations;
    j["converged"] = r.converged;
    if (r.weight_percentiles) {
        j["weight_percentiles"] = to_json(*r.weight_percentiles);
    }
    if (r.untruncated_weight_percentiles) {
        j["untruncated_weight_percentiles"] = to_json(*r.untruncated_weight_percentiles);
    }
    if (r.truncation_cap) {
        j["truncation_cap"] = *r.truncation_cap;
    }
    if (r.method == Method::ipw_msm) {
        j["n_extreme_weights"] = r.n_extreme_weights;
    }
    j["notes"] = r.notes;
    return j;
}

} // namespace txmsm
