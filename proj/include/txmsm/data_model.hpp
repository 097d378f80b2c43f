#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace txmsm {

/// Exposure category of the first transfused unit.
enum class ArmCode : int { Reference = 0, ExposedEverPregnant = 1, OtherMixed = 9 };

std::optional<ArmCode> arm_from_int(long value);
constexpr int to_int(ArmCode arm) { return static_cast<int>(arm); }
inline constexpr ArmCode all_arms[] = {ArmCode::Reference, ArmCode::ExposedEverPregnant,
                                       ArmCode::OtherMixed};

/// One counting-process line of the cohort table.
struct IntervalRow {
    std::string pin;
    ArmCode arm = ArmCode::Reference;
    int transfusion_year_first = 0;
    std::string patient_abo_rh;
    std::string hospital;
    bool censored = false;
    int arm_total_cum = 1;
    int t_begin = -1;
    int t_end = 1;
    int t_end_new = 1;
    bool death = false;

    bool operator==(const IntervalRow &) const = default;
};

/// Row boundaries: day 0 entry sits inside the first interval (-1, 1], then
/// one row per day through day 28, then 28-day blocks (28, 56], (56, 84], ...
namespace grid {
inline constexpr int origin = -1;
inline constexpr int daily_horizon = 28;
inline constexpr int block_days = 28;

bool is_row_end(int t_end);
/// End of the row that starts at `t_begin`; `t_begin` must itself be a boundary.
int next_row_end(int t_begin);
bool is_row_begin(int t_begin);
/// End of the grid row containing `day` (day >= 0).
int row_end_containing(int day);
} // namespace grid

struct SubjectRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

/// Validated, immutable cohort. Build one with validate_cohort().
class Cohort {
  public:
    const std::vector<IntervalRow> &rows() const noexcept { return rows_; }
    std::size_t n_rows() const noexcept { return rows_.size(); }
    std::size_t n_subjects() const noexcept { return subjects_.size(); }

    const SubjectRange &subject(std::size_t index) const { return subjects_.at(index); }
    const std::vector<SubjectRange> &subjects() const noexcept { return subjects_; }
    std::span<const IntervalRow> subject_rows(std::size_t index) const;
    const IntervalRow &final_row(std::size_t index) const { return rows_.at(subject(index).end - 1); }

    std::optional<std::size_t> find_subject(const std::string &pin) const;
    /// Subject index owning each row.
    const std::vector<std::size_t> &subject_of_row() const noexcept { return subject_of_row_; }

    /// Cluster label for robust variance; the pin unless episodes were split at ingestion.
    const std::string &cluster(std::size_t subject_index) const { return clusters_.at(subject_index); }

    /// Categorical levels in first-appearance order.
    const std::vector<std::string> &hospital_levels() const noexcept { return hospital_levels_; }
    const std::vector<std::string> &abo_levels() const noexcept { return abo_levels_; }
    /// Distinct first-transfusion years, ascending.
    const std::vector<int> &year_levels() const noexcept { return year_levels_; }

  private:
    friend Cohort validate_cohort(std::vector<IntervalRow> rows,
                                  std::vector<std::string> clusters);

    std::vector<IntervalRow> rows_;
    std::vector<SubjectRange> subjects_;
    std::vector<std::size_t> subject_of_row_;
    std::vector<std::string> clusters_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> hospital_levels_;
    std::vector<std::string> abo_levels_;
    std::vector<int> year_levels_;
};

/// Checks every schema invariant and indexes subjects. Throws CohortError with
/// codes EmptyCohort, InvalidInterval, CensoredAndDeath, InvalidCumulativeCount,
/// NonContiguousSubject, OverlappingIntervals, NonCanonicalGrid,
/// ArmChangesWithinSubject, BaselineChangesWithinSubject, DecreasingCumulativeCount,
/// NonTerminalCensoring, NonTerminalDeath.
Cohort validate_cohort(std::vector<IntervalRow> rows);

/// As above with an explicit cluster label per subject (in order of first appearance).
Cohort validate_cohort(std::vector<IntervalRow> rows, std::vector<std::string> clusters);

/// Follow-up of one subject before expansion onto the row grid.
struct RawFollowup {
    std::string pin;
    ArmCode arm = ArmCode::Reference;
    int transfusion_year_first = 0;
    std::string patient_abo_rh;
    std::string hospital;
    int exit_day = 1;
    bool death_at_exit = false;
    std::optional<int> switch_day;
    std::vector<int> transfusion_days{0};
};

/// Lays a subject's follow-up onto the canonical grid. Throws InputError
/// EmptyFollowup when exit_day < 1, InvalidFollowup for other precondition breaches.
std::vector<IntervalRow> expand_followup(const RawFollowup &raw);

/// Canonical column names, in file order.
inline constexpr std::string_view cohort_columns[] = {
    "PIN",    "Arm",     "Transfusion_Year_first", "Patient_ABORh", "Hospital", "Censored",
    "Arm_Total_cum", "t_begin", "t_end", "t_end_new", "Death"};

/// Optional column that splits a patient into per-episode subjects.
inline constexpr std::string_view episode_column = "Episode";

Cohort parse_cohort(std::istream &in, const std::string &source = "<stream>");
Cohort read_cohort(const std::filesystem::path &path);
void write_cohort(std::ostream &out, const Cohort &cohort);
void write_cohort(const std::filesystem::path &path, const Cohort &cohort);

struct CohortSummary {
    std::size_t n_subjects = 0;
    std::size_t n_deaths = 0;
    double person_time_years = 0.0;
    double followup_median = 0.0;
    double followup_q1 = 0.0;
    double followup_q3 = 0.0;
    std::map<ArmCode, std::size_t> subjects_by_arm;
    std::map<ArmCode, std::size_t> deaths_by_arm;
    double transfusions_median = 0.0;
    double transfusions_q1 = 0.0;
    double transfusions_q3 = 0.0;

    double death_percent() const;
    double arm_percent(ArmCode arm) const;
};

CohortSummary summarize_cohort(const Cohort &cohort);
std::string render_summary(const CohortSummary &summary);

std::string_view arm_label(ArmCode arm);

} // namespace txmsm
