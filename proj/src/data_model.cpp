#include "txmsm/data_model.hpp"

#include "txmsm/errors.hpp"
#include "txmsm/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace txmsm {

std::optional<ArmCode> arm_from_int(long value) {
    switch (value) {
    case 0:
        return ArmCode::Reference;
    case 1:
        return ArmCode::ExposedEverPregnant;
    case 9:
        return ArmCode::OtherMixed;
    default:
        return std::nullopt;
    }
}

std::string_view arm_label(ArmCode arm) {
    switch (arm) {
    case ArmCode::Reference:
        return "Male (reference)";
    case ArmCode::ExposedEverPregnant:
        return "Ever-pregnant female";
    case ArmCode::OtherMixed:
        return "Other/mixed";
    }
    return "?";
}

namespace grid {

bool is_row_end(int t_end) {
    if (t_end >= 1 && t_end <= daily_horizon) {
        return true;
    }
    return t_end > daily_horizon && t_end % block_days == 0;
}

bool is_row_begin(int t_begin) {
    return t_begin == origin || (t_begin >= 1 && is_row_end(t_begin));
}

int next_row_end(int t_begin) {
    if (t_begin == origin) {
        return 1;
    }
    if (t_begin < daily_horizon) {
        return t_begin + 1;
    }
    return t_begin + block_days;
}

int row_end_containing(int day) {
    if (day <= 1) {
        return 1;
    }
    if (day <= daily_horizon) {
        return day;
    }
    return ((day + block_days - 1) / block_days) * block_days;
}

} // namespace grid

std::span<const IntervalRow> Cohort::subject_rows(std::size_t index) const {
    const auto &range = subjects_.at(index);
    return std::span<const IntervalRow>(rows_).subspan(range.begin, range.size());
}

std::optional<std::size_t> Cohort::find_subject(const std::string &pin) const {
    auto it = index_.find(pin);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

void check_row(const IntervalRow &row, std::size_t ordinal) {
    if (!(row.t_begin < row.t_end && row.t_begin < row.t_end_new && row.t_end_new <= row.t_end)) {
        throw CohortError("InvalidInterval", row.pin, ordinal,
                          fmt::format("need t_begin < t_end_new <= t_end, got ({}, {}, {})",
                                      row.t_begin, row.t_end_new, row.t_end));
    }
    if (row.censored && row.death) {
        throw CohortError("CensoredAndDeath", row.pin, ordinal,
                          "censored and death flagged on the same row");
    }
    if (row.arm_total_cum < 1) {
        throw CohortError("InvalidCumulativeCount", row.pin, ordinal,
                          fmt::format("Arm_Total_cum must be >= 1, got {}", row.arm_total_cum));
    }
    if (!grid::is_row_end(row.t_end) || !grid::is_row_begin(row.t_begin) ||
        grid::next_row_end(row.t_begin) != row.t_end) {
        throw CohortError("NonCanonicalGrid", row.pin, ordinal,
                          fmt::format("interval ({}, {}] is not a grid row", row.t_begin, row.t_end));
    }
}

void check_transition(const IntervalRow &prev, const IntervalRow &row, std::size_t ordinal) {
    if (row.t_begin < prev.t_end) {
        throw CohortError("OverlappingIntervals", row.pin, ordinal,
                          fmt::format("t_begin {} precedes previous t_end {}", row.t_begin,
                                      prev.t_end));
    }
    if (row.t_begin > prev.t_end) {
        throw CohortError("NonCanonicalGrid", row.pin, ordinal,
                          fmt::format("gap between previous t_end {} and t_begin {}", prev.t_end,
                                      row.t_begin));
    }
    if (prev.t_end_new != prev.t_end) {
        throw CohortError("NonCanonicalGrid", row.pin, ordinal - 1,
                          "t_end_new differs from t_end on a non-final row");
    }
    if (row.arm != prev.arm) {
        throw CohortError("ArmChangesWithinSubject", row.pin, ordinal,
                          fmt::format("Arm changes from {} to {}", to_int(prev.arm),
                                      to_int(row.arm)));
    }
    if (row.transfusion_year_first != prev.transfusion_year_first ||
        row.patient_abo_rh != prev.patient_abo_rh || row.hospital != prev.hospital) {
        throw CohortError("BaselineChangesWithinSubject", row.pin, ordinal,
                          "baseline covariates must be constant within a subject");
    }
    if (row.arm_total_cum < prev.arm_total_cum) {
        throw CohortError("DecreasingCumulativeCount", row.pin, ordinal,
                          fmt::format("Arm_Total_cum decreases from {} to {}", prev.arm_total_cum,
                                      row.arm_total_cum));
    }
    if (prev.censored) {
        throw CohortError("NonTerminalCensoring", row.pin, ordinal - 1,
                          "censoring flagged before the subject's final row");
    }
    if (prev.death) {
        throw CohortError("NonTerminalDeath", row.pin, ordinal - 1,
                          "death flagged before the subject's final row");
    }
}

void add_level(std::vector<std::string> &levels, std::set<std::string> &seen,
               const std::string &value) {
    if (seen.insert(value).second) {
        levels.push_back(value);
    }
}

} // namespace

Cohort validate_cohort(std::vector<IntervalRow> rows) {
    return validate_cohort(std::move(rows), {});
}

Cohort validate_cohort(std::vector<IntervalRow> rows, std::vector<std::string> clusters) {
    if (rows.empty()) {
        throw CohortError("EmptyCohort", "", 0, "cohort has no rows");
    }
    Cohort cohort;
    cohort.subject_of_row_.reserve(rows.size());
    std::set<std::string> hospitals;
    std::set<std::string> groups;
    std::set<int> years;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &row = rows[i];
        const auto ordinal = i + 1;
        check_row(row, ordinal);
        const bool starts_subject = i == 0 || rows[i - 1].pin != row.pin;
        if (starts_subject) {
            if (!cohort.index_.emplace(row.pin, cohort.subjects_.size()).second) {
                throw CohortError("NonContiguousSubject", row.pin, ordinal,
                                  "subject rows are not contiguous");
            }
            if (row.t_begin != grid::origin) {
                throw CohortError("NonCanonicalGrid", row.pin, ordinal,
                                  fmt::format("first row must start at {}, got {}", grid::origin,
                                              row.t_begin));
            }
            if (!cohort.subjects_.empty()) {
                cohort.subjects_.back().end = i;
            }
            cohort.subjects_.push_back(SubjectRange{i, i});
            add_level(cohort.hospital_levels_, hospitals, row.hospital);
            add_level(cohort.abo_levels_, groups, row.patient_abo_rh);
            years.insert(row.transfusion_year_first);
        } else {
            check_transition(rows[i - 1], row, ordinal);
        }
        cohort.subject_of_row_.push_back(cohort.subjects_.size() - 1);
    }
    cohort.subjects_.back().end = rows.size();

    if (clusters.empty()) {
        clusters.reserve(cohort.subjects_.size());
        for (const auto &range : cohort.subjects_) {
            clusters.push_back(rows[range.begin].pin);
        }
    } else if (clusters.size() != cohort.subjects_.size()) {
        throw InputError("ClusterMismatch",
                         fmt::format("{} cluster labels for {} subjects", clusters.size(),
                                     cohort.subjects_.size()));
    }
    cohort.clusters_ = std::move(clusters);
    cohort.year_levels_.assign(years.begin(), years.end());
    cohort.rows_ = std::move(rows);
    return cohort;
}

std::vector<IntervalRow> expand_followup(const RawFollowup &raw) {
    if (raw.exit_day < 1) {
        throw InputError("EmptyFollowup",
                         fmt::format("subject '{}': exit_day {} < 1", raw.pin, raw.exit_day));
    }
    if (raw.switch_day && (*raw.switch_day < 1 || *raw.switch_day > raw.exit_day)) {
        throw InputError("InvalidFollowup",
                         fmt::format("subject '{}': switch_day {} outside [1, {}]", raw.pin,
                                     *raw.switch_day, raw.exit_day));
    }
    if (raw.transfusion_days.empty() || raw.transfusion_days.front() != 0 ||
        !std::is_sorted(raw.transfusion_days.begin(), raw.transfusion_days.end())) {
        throw InputError("InvalidFollowup",
                         fmt::format("subject '{}': transfusion days must be sorted and start at 0",
                                     raw.pin));
    }

    const int end = raw.switch_day ? std::min(raw.exit_day, *raw.switch_day) : raw.exit_day;
    // A switch on the exit day loses to death (death-first within a day).
    const bool switched =
        raw.switch_day && (*raw.switch_day < raw.exit_day || !raw.death_at_exit);

    std::vector<IntervalRow> rows;
    auto next_transfusion = raw.transfusion_days.begin();
    int cumulative = 0;
    int t_begin = grid::origin;
    while (true) {
        const int t_end = grid::next_row_end(t_begin);
        const bool last = end <= t_end;
        const int t_end_new = last ? end : t_end;
        while (next_transfusion != raw.transfusion_days.end() && *next_transfusion <= t_end_new) {
            ++cumulative;
            ++next_transfusion;
        }
        IntervalRow row;
        row.pin = raw.pin;
        row.arm = raw.arm;
        row.transfusion_year_first = raw.transfusion_year_first;
        row.patient_abo_rh = raw.patient_abo_rh;
        row.hospital = raw.hospital;
        row.arm_total_cum = cumulative;
        row.t_begin = t_begin;
        row.t_end = t_end;
        row.t_end_new = t_end_new;
        if (last) {
            row.censored = switched;
            row.death = raw.death_at_exit && !switched;
        }
        rows.push_back(std::move(row));
        if (last) {
            break;
        }
        t_begin = t_end;
    }
    return rows;
}

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

long parse_integer(std::string_view cell, std::size_t line, std::string_view column,
                   const std::string &source) {
    const auto text = trim(cell);
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InputError("UnparsableCell",
                         fmt::format("{} line {}, column {}: '{}' is not an integer", source, line,
                                     column, text));
    }
    return value;
}

bool parse_flag(std::string_view cell, std::size_t line, std::string_view column,
                const std::string &source) {
    const auto value = parse_integer(cell, line, column, source);
    if (value != 0 && value != 1) {
        throw InputError("UnparsableCell", fmt::format("{} line {}, column {}: flag must be 0 or 1, got {}",
                                                       source, line, column, value));
    }
    return value == 1;
}

} // namespace

Cohort parse_cohort(std::istream &in, const std::string &source) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError("MissingColumn", fmt::format("{}: no header line", source));
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
    }
    const auto header = split_line(trim(line));
    std::array<std::size_t, std::size(cohort_columns)> position{};
    std::optional<std::size_t> episode_position;
    for (std::size_t c = 0; c < std::size(cohort_columns); ++c) {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](std::string_view h) { return trim(h) == cohort_columns[c]; });
        if (it == header.end()) {
            throw InputError("MissingColumn", fmt::format("{}: MissingColumn(\"{}\")", source,
                                                          cohort_columns[c]));
        }
        position[c] = static_cast<std::size_t>(it - header.begin());
    }
    for (std::size_t h = 0; h < header.size(); ++h) {
        const auto name = trim(header[h]);
        if (name == episode_column) {
            episode_position = h;
        } else if (std::find(std::begin(cohort_columns), std::end(cohort_columns), name) ==
                   std::end(cohort_columns)) {
            throw InputError("UnexpectedColumn",
                             fmt::format("{}: unexpected column '{}'", source, name));
        }
    }

    std::vector<IntervalRow> rows;
    std::vector<std::string> clusters;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        const auto content = trim(line);
        if (content.empty()) {
            continue;
        }
        const auto cells = split_line(content);
        if (cells.size() != header.size()) {
            throw InputError("UnparsableCell",
                             fmt::format("{} line {}: expected {} cells, found {}", source,
                                         line_number, header.size(), cells.size()));
        }
        auto cell = [&](std::size_t c) { return cells[position[c]]; };
        IntervalRow row;
        row.pin = std::string(trim(cell(0)));
        if (row.pin.empty()) {
            throw InputError("UnparsableCell",
                             fmt::format("{} line {}, column PIN: empty identifier", source,
                                         line_number));
        }
        const auto arm_value = parse_integer(cell(1), line_number, cohort_columns[1], source);
        const auto arm = arm_from_int(arm_value);
        if (!arm) {
            throw InputError("UnparsableCell",
                             fmt::format("{} line {}, column Arm: {} is not one of 0, 1, 9",
                                         source, line_number, arm_value));
        }
        row.arm = *arm;
        row.transfusion_year_first =
            static_cast<int>(parse_integer(cell(2), line_number, cohort_columns[2], source));
        row.patient_abo_rh = std::string(trim(cell(3)));
        row.hospital = std::string(trim(cell(4)));
        row.censored = parse_flag(cell(5), line_number, cohort_columns[5], source);
        row.arm_total_cum =
            static_cast<int>(parse_integer(cell(6), line_number, cohort_columns[6], source));
        row.t_begin = static_cast<int>(parse_integer(cell(7), line_number, cohort_columns[7], source));
        row.t_end = static_cast<int>(parse_integer(cell(8), line_number, cohort_columns[8], source));
        row.t_end_new =
            static_cast<int>(parse_integer(cell(9), line_number, cohort_columns[9], source));
        row.death = parse_flag(cell(10), line_number, cohort_columns[10], source);
        if (episode_position) {
            const auto episode = std::string(trim(cells[*episode_position]));
            const auto patient = row.pin;
            row.pin = patient + "#" + episode;
            if (rows.empty() || rows.back().pin != row.pin) {
                clusters.push_back(patient);
            }
        }
        rows.push_back(std::move(row));
    }
    return validate_cohort(std::move(rows), std::move(clusters));
}

Cohort read_cohort(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("UnreadableFile", fmt::format("cannot open '{}'", path.string()));
    }
    return parse_cohort(in, path.string());
}

void write_cohort(std::ostream &out, const Cohort &cohort) {
    for (std::size_t c = 0; c < std::size(cohort_columns); ++c) {
        out << (c ? "," : "") << cohort_columns[c];
    }
    out << '\n';
    std::string buffer;
    for (const auto &r : cohort.rows()) {
        buffer.clear();
        fmt::format_to(std::back_inserter(buffer), "{},{},{},{},{},{},{},{},{},{},{}\n", r.pin,
                       to_int(r.arm), r.transfusion_year_first, r.patient_abo_rh, r.hospital,
                       r.censored ? 1 : 0, r.arm_total_cum, r.t_begin, r.t_end, r.t_end_new,
                       r.death ? 1 : 0);
        out << buffer;
    }
}

void write_cohort(const std::filesystem::path &path, const Cohort &cohort) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("UnwritableFile", fmt::format("cannot write '{}'", path.string()));
    }
    write_cohort(out, cohort);
}

double CohortSummary::death_percent() const {
    return n_subjects == 0 ? 0.0
                           : 100.0 * static_cast<double>(n_deaths) / static_cast<double>(n_subjects);
}

double CohortSummary::arm_percent(ArmCode arm) const {
    auto it = subjects_by_arm.find(arm);
    if (n_subjects == 0 || it == subjects_by_arm.end()) {
        return 0.0;
    }
    return 100.0 * static_cast<double>(it->second) / static_cast<double>(n_subjects);
}

CohortSummary summarize_cohort(const Cohort &cohort) {
    CohortSummary s;
    for (auto arm : all_arms) {
        s.subjects_by_arm[arm] = 0;
        s.deaths_by_arm[arm] = 0;
    }
    std::vector<double> followup;
    std::vector<double> transfusions;
    followup.reserve(cohort.n_subjects());
    transfusions.reserve(cohort.n_subjects());
    for (std::size_t i = 0; i < cohort.n_subjects(); ++i) {
        const auto &last = cohort.final_row(i);
        ++s.n_subjects;
        ++s.subjects_by_arm[last.arm];
        if (last.death) {
            ++s.n_deaths;
            ++s.deaths_by_arm[last.arm];
        }
        followup.push_back(last.t_end_new);
        transfusions.push_back(last.arm_total_cum);
    }
    double total_days = 0.0;
    for (double f : followup) {
        total_days += f;
    }
    s.person_time_years = total_days / 365.25;
    std::sort(followup.begin(), followup.end());
    std::sort(transfusions.begin(), transfusions.end());
    if (!followup.empty()) {
        s.followup_median = stats::quantile_sorted(followup, 0.5);
        s.followup_q1 = stats::quantile_sorted(followup, 0.25);
        s.followup_q3 = stats::quantile_sorted(followup, 0.75);
        s.transfusions_median = stats::quantile_sorted(transfusions, 0.5);
        s.transfusions_q1 = stats::quantile_sorted(transfusions, 0.25);
        s.transfusions_q3 = stats::quantile_sorted(transfusions, 0.75);
    }
    return s;
}

std::string render_summary(const CohortSummary &s) {
    std::string out;
    auto line = [&out](std::string_view label, const std::string &value) {
        fmt::format_to(std::back_inserter(out), "{:<52}{}\n", label, value);
    };
    line("Number of patients", fmt::format("N={}", s.n_subjects));
    line("Number of deaths, (%)", fmt::format("{} ({:.0f}%)", s.n_deaths, s.death_percent()));
    line("Follow-up, median (IQR), days",
         fmt::format("{:.0f} ({:.0f}-{:.0f})", s.followup_median, s.followup_q1, s.followup_q3));
    line("Person-time, sum in years", fmt::format("{:.2f}", s.person_time_years));
    line("Transfusions per patient, median (IQR)",
         fmt::format("{:.0f} ({:.0f}-{:.0f})", s.transfusions_median, s.transfusions_q1,
                     s.transfusions_q3));
    for (auto arm : all_arms) {
        line(fmt::format("Arm {} ({})", to_int(arm), arm_label(arm)),
             fmt::format("{} ({:.0f}%)", s.subjects_by_arm.at(arm), s.arm_percent(arm)));
    }
    return out;
}

} // namespace txmsm
