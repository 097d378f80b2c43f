#include "txmsm/scenario.hpp"

#include "txmsm/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numeric>

namespace txmsm {

double SimScenario::offarm_probability(ArmCode arm) const {
    switch (arm) {
    case ArmCode::Reference:
        return offarm_prob_arm0.value_or(offarm_prob);
    case ArmCode::ExposedEverPregnant:
        return offarm_prob_arm1.value_or(offarm_prob);
    case ArmCode::OtherMixed:
        return 0.0;
    }
    return 0.0;
}

namespace {

[[noreturn]] void invalid(const std::string &message) { throw InputError("InvalidScenario", message); }

void require_probability(double p, const std::string &name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        invalid(fmt::format("{} = {} is not a probability", name, p));
    }
}

void require_nonnegative(double v, const std::string &name) {
    if (!(v >= 0.0 && std::isfinite(v))) {
        invalid(fmt::format("{} = {} must be a finite value >= 0", name, v));
    }
}

void require_finite(double v, const std::string &name) {
    if (!std::isfinite(v)) {
        invalid(fmt::format("{} = {} must be finite", name, v));
    }
}

void require_distribution(std::span<const double> p, const std::string &name) {
    double total = 0.0;
    for (double v : p) {
        require_probability(v, name);
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        invalid(fmt::format("{} sums to {}, not 1", name, total));
    }
}

} // namespace

void SimScenario::validate() const {
    if (n_subjects == 0) {
        invalid("n_subjects must be at least 1");
    }
    require_finite(true_log_hr, "true_log_hr");
    require_nonnegative(frailty_sd, "frailty_sd");
    require_nonnegative(death_hazard_base, "death_hazard_base");
    require_finite(death_frailty_coef, "death_frailty_coef");
    require_nonnegative(transfusion_demand_base, "transfusion_demand_base");
    require_finite(demand_frailty_coef, "demand_frailty_coef");
    require_nonnegative(demand_decay, "demand_decay");
    require_nonnegative(initial_extra_units, "initial_extra_units");
    require_nonnegative(hb_dose_gap, "hb_dose_gap");
    require_probability(offarm_prob, "offarm_prob");
    if (offarm_prob_arm0) {
        require_probability(*offarm_prob_arm0, "offarm_prob_arm0");
    }
    if (offarm_prob_arm1) {
        require_probability(*offarm_prob_arm1, "offarm_prob_arm1");
    }
    if (max_followup_days < 1) {
        invalid("max_followup_days must be at least 1");
    }
    if (hospitals.empty()) {
        invalid("at least one hospital is required");
    }
    std::vector<double> shares;
    for (const auto &h : hospitals) {
        if (h.name.empty() || h.name.find_first_of(",=# \t") != std::string::npos) {
            invalid(fmt::format("hospital name '{}' is empty or contains a separator", h.name));
        }
        shares.push_back(h.share);
        require_distribution(h.arm_mix, "arm_mix." + h.name);
        require_finite(h.death_log_hr, "death_log_hr." + h.name);
    }
    require_distribution(shares, "hospital_shares");
    if (blood_groups.empty() || blood_groups.size() != blood_group_shares.size()) {
        invalid("blood_groups and blood_group_shares must be nonempty and of equal length");
    }
    for (const auto &b : blood_groups) {
        if (b.empty() || b.find_first_of(",=# \t") != std::string::npos) {
            invalid(fmt::format("blood group '{}' is empty or contains a separator", b));
        }
    }
    require_distribution(blood_group_shares, "blood_group_shares");
    if (year_min > year_max) {
        invalid(fmt::format("year_min {} exceeds year_max {}", year_min, year_max));
    }
    require_finite(arm_year_slope, "arm_year_slope");
    require_probability(linkage_loss, "linkage_loss");
    if (linkage_loss >= 1.0) {
        invalid("linkage_loss must be below 1");
    }
}

SimScenario default_scenario() {
    SimScenario s;
    s.hospitals = {
        {"H1", 0.35, {0.74, 0.10, 0.16}, 0.0},
        {"H2", 0.30, {0.68, 0.14, 0.18}, 0.15},
        {"H3", 0.20, {0.76, 0.08, 0.16}, -0.10},
        {"H4", 0.15, {0.64, 0.16, 0.20}, 0.25},
    };
    s.blood_groups = {"O+", "A+", "B+", "AB+", "O-", "A-", "B-", "AB-"};
    s.blood_group_shares = {0.39, 0.37, 0.08, 0.03, 0.07, 0.04, 0.015, 0.005};
    s.offarm_prob_arm1 = 0.11;
    return s;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string &value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = value.find(',', start);
        out.push_back(trim(std::string_view(value).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string &key, const std::string &text) {
    double v = 0.0;
    const auto *end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        invalid(fmt::format("{}: '{}' is not a number", key, text));
    }
    return v;
}

template <typename Int> Int parse_int(const std::string &key, const std::string &text) {
    Int v{};
    const auto *end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        invalid(fmt::format("{}: '{}' is not an integer", key, text));
    }
    return v;
}

std::vector<double> parse_doubles(const std::string &key, const std::string &text) {
    std::vector<double> out;
    for (const auto &item : split_list(text)) {
        out.push_back(parse_double(key, item));
    }
    return out;
}

std::string join(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + fmt::format("{}", values[i]);
    }
    return out;
}

} // namespace

SimScenario parse_scenario(std::istream &in, const std::string &source) {
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string content = trim(std::string_view(line).substr(0, hash));
        if (content.empty()) {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            invalid(fmt::format("{}:{}: expected 'key = value'", source, line_no));
        }
        std::string key = trim(std::string_view(content).substr(0, eq));
        std::string value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty() || value.empty()) {
            invalid(fmt::format("{}:{}: empty key or value", source, line_no));
        }
        if (!entries.emplace(key, value).second) {
            invalid(fmt::format("{}:{}: duplicate key '{}'", source, line_no, key));
        }
    }

    SimScenario s = default_scenario();
    auto take = [&entries](const std::string &key) -> std::optional<std::string> {
        const auto it = entries.find(key);
        if (it == entries.end()) {
            return std::nullopt;
        }
        std::string v = it->second;
        entries.erase(it);
        return v;
    };

    if (auto v = take("hospitals")) {
        std::vector<HospitalSpec> hospitals;
        const auto names = split_list(*v);
        for (const auto &name : names) {
            HospitalSpec h;
            h.name = name;
            h.share = 1.0 / static_cast<double>(names.size());
            hospitals.push_back(h);
        }
        s.hospitals = std::move(hospitals);
    }
    if (auto v = take("hospital_shares")) {
        const auto shares = parse_doubles("hospital_shares", *v);
        if (shares.size() != s.hospitals.size()) {
            invalid(fmt::format("hospital_shares has {} values for {} hospitals", shares.size(),
                                s.hospitals.size()));
        }
        for (std::size_t h = 0; h < shares.size(); ++h) {
            s.hospitals[h].share = shares[h];
        }
    }
    for (auto &h : s.hospitals) {
        if (auto v = take("arm_mix." + h.name)) {
            const auto mix = parse_doubles("arm_mix." + h.name, *v);
            if (mix.size() != 3) {
                invalid(fmt::format("arm_mix.{} needs 3 probabilities (arms 0, 1, 9)", h.name));
            }
            h.arm_mix = {mix[0], mix[1], mix[2]};
        }
        if (auto v = take("death_log_hr." + h.name)) {
            h.death_log_hr = parse_double("death_log_hr." + h.name, *v);
        }
    }
    if (auto v = take("blood_groups")) {
        s.blood_groups = split_list(*v);
        if (!entries.count("blood_group_shares")) {
            s.blood_group_shares.assign(s.blood_groups.size(),
                                        1.0 / static_cast<double>(s.blood_groups.size()));
        }
    }
    if (auto v = take("blood_group_shares")) {
        s.blood_group_shares = parse_doubles("blood_group_shares", *v);
    }

    const std::map<std::string, std::function<void(const std::string &, const std::string &)>>
        scalars{
            {"n_subjects", [&](auto &k, auto &v) { s.n_subjects = parse_int<std::size_t>(k, v); }},
            {"seed", [&](auto &k, auto &v) { s.seed = parse_int<std::uint64_t>(k, v); }},
            {"true_log_hr", [&](auto &k, auto &v) { s.true_log_hr = parse_double(k, v); }},
            {"frailty_sd", [&](auto &k, auto &v) { s.frailty_sd = parse_double(k, v); }},
            {"death_hazard_base", [&](auto &k, auto &v) { s.death_hazard_base = parse_double(k, v); }},
            {"death_frailty_coef", [&](auto &k, auto &v) { s.death_frailty_coef = parse_double(k, v); }},
            {"transfusion_demand_base",
             [&](auto &k, auto &v) { s.transfusion_demand_base = parse_double(k, v); }},
            {"demand_frailty_coef", [&](auto &k, auto &v) { s.demand_frailty_coef = parse_double(k, v); }},
            {"demand_decay", [&](auto &k, auto &v) { s.demand_decay = parse_double(k, v); }},
            {"initial_extra_units",
             [&](auto &k, auto &v) { s.initial_extra_units = parse_double(k, v); }},
            {"hb_dose_gap", [&](auto &k, auto &v) { s.hb_dose_gap = parse_double(k, v); }},
            {"offarm_prob", [&](auto &k, auto &v) { s.offarm_prob = parse_double(k, v); }},
            {"offarm_prob_arm0", [&](auto &k, auto &v) { s.offarm_prob_arm0 = parse_double(k, v); }},
            {"offarm_prob_arm1", [&](auto &k, auto &v) { s.offarm_prob_arm1 = parse_double(k, v); }},
            {"max_followup_days", [&](auto &k, auto &v) { s.max_followup_days = parse_int<int>(k, v); }},
            {"year_min", [&](auto &k, auto &v) { s.year_min = parse_int<int>(k, v); }},
            {"year_max", [&](auto &k, auto &v) { s.year_max = parse_int<int>(k, v); }},
            {"arm_year_slope", [&](auto &k, auto &v) { s.arm_year_slope = parse_double(k, v); }},
            {"linkage_loss", [&](auto &k, auto &v) { s.linkage_loss = parse_double(k, v); }},
        };
    for (const auto &[key, value] : entries) {
        const auto it = scalars.find(key);
        if (it == scalars.end()) {
            invalid(fmt::format("{}: unknown key '{}'", source, key));
        }
        it->second(key, value);
    }
    s.validate();
    return s;
}

SimScenario read_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("UnreadableFile", fmt::format("cannot open scenario '{}'", path.string()));
    }
    return parse_scenario(in, path.string());
}

std::string serialize_scenario(const SimScenario &s) {
    std::string out;
    auto put = [&out](std::string_view key, const std::string &value) {
        out += fmt::format("{} = {}\n", key, value);
    };
    put("n_subjects", std::to_string(s.n_subjects));
    put("seed", std::to_string(s.seed));
    put("true_log_hr", fmt::format("{}", s.true_log_hr));
    put("frailty_sd", fmt::format("{}", s.frailty_sd));
    put("death_hazard_base", fmt::format("{}", s.death_hazard_base));
    put("death_frailty_coef", fmt::format("{}", s.death_frailty_coef));
    put("transfusion_demand_base", fmt::format("{}", s.transfusion_demand_base));
    put("demand_frailty_coef", fmt::format("{}", s.demand_frailty_coef));
    put("demand_decay", fmt::format("{}", s.demand_decay));
    put("initial_extra_units", fmt::format("{}", s.initial_extra_units));
    put("hb_dose_gap", fmt::format("{}", s.hb_dose_gap));
    put("offarm_prob", fmt::format("{}", s.offarm_prob));
    if (s.offarm_prob_arm0) {
        put("offarm_prob_arm0", fmt::format("{}", *s.offarm_prob_arm0));
    }
    if (s.offarm_prob_arm1) {
        put("offarm_prob_arm1", fmt::format("{}", *s.offarm_prob_arm1));
    }
    put("max_followup_days", std::to_string(s.max_followup_days));
    std::string names;
    std::vector<double> shares;
    for (const auto &h : s.hospitals) {
        names += (names.empty() ? "" : ",") + h.name;
        shares.push_back(h.share);
    }
    put("hospitals", names);
    put("hospital_shares", join(shares));
    for (const auto &h : s.hospitals) {
        put("arm_mix." + h.name, join(h.arm_mix));
        put("death_log_hr." + h.name, fmt::format("{}", h.death_log_hr));
    }
    std::string groups;
    for (const auto &b : s.blood_groups) {
        groups += (groups.empty() ? "" : ",") + b;
    }
    put("blood_groups", groups);
    put("blood_group_shares", join(s.blood_group_shares));
    put("year_min", std::to_string(s.year_min));
    put("year_max", std::to_string(s.year_max));
    put("arm_year_slope", fmt::format("{}", s.arm_year_slope));
    put("linkage_loss", fmt::format("{}", s.linkage_loss));
    return out;
}

std::string scenario_hash(const SimScenario &scenario) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize_scenario(scenario)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

} // namespace txmsm
