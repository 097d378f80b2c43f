#include "oracles.hpp"

#include "txmsm/data_model.hpp"
#include "txmsm/errors.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace txmsm;

namespace {

const char *header =
    "PIN,Arm,Transfusion_Year_first,Patient_ABORh,Hospital,Censored,Arm_Total_cum,t_begin,t_end,"
    "t_end_new,Death\n";

std::string code_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    return "";
}

RawFollowup raw_subject(int exit_day, bool death, std::optional<int> switch_day = std::nullopt) {
    RawFollowup raw;
    raw.pin = "P1";
    raw.transfusion_year_first = 2010;
    raw.patient_abo_rh = "O+";
    raw.hospital = "H1";
    raw.exit_day = exit_day;
    raw.death_at_exit = death;
    raw.switch_day = switch_day;
    return raw;
}

} // namespace

TEST_CASE("grid: daily rows through day 28, then 28-day blocks") {
    CHECK(grid::next_row_end(-1) == 1);
    CHECK(grid::next_row_end(1) == 2);
    CHECK(grid::next_row_end(27) == 28);
    CHECK(grid::next_row_end(28) == 56);
    CHECK(grid::next_row_end(56) == 84);
    CHECK(grid::row_end_containing(0) == 1);
    CHECK(grid::row_end_containing(28) == 28);
    CHECK(grid::row_end_containing(29) == 56);
    CHECK(grid::is_row_end(84));
    CHECK_FALSE(grid::is_row_end(30));
}

TEST_CASE("validate_cohort: minimal well-formed subject") {
    std::vector<IntervalRow> rows(2);
    rows[0] = {"A", ArmCode::Reference, 2010, "O+", "H1", false, 1, -1, 1, 1, false};
    rows[1] = {"A", ArmCode::Reference, 2010, "O+", "H1", false, 1, 1, 2, 2, true};
    const auto c = validate_cohort(rows);
    CHECK(c.n_rows() == 2);
    CHECK(c.n_subjects() == 1);
}

TEST_CASE("validate_cohort: schema violations carry their codes") {
    auto base = expand_followup(raw_subject(5, true));
    REQUIRE(base.size() == 5);

    auto rows = base;
    rows[2].censored = true;
    CHECK(code_of([&] { validate_cohort(rows); }) == "NonTerminalCensoring");

    rows = base;
    rows[3].arm = ArmCode::ExposedEverPregnant;
    CHECK(code_of([&] { validate_cohort(rows); }) == "ArmChangesWithinSubject");

    rows = base;
    rows[2].arm_total_cum = 3;
    CHECK(code_of([&] { validate_cohort(rows); }) == "DecreasingCumulativeCount");

    rows = base;
    rows.insert(rows.begin() + 2, rows[1]);
    CHECK(code_of([&] { validate_cohort(rows); }) == "OverlappingIntervals");

    rows = base;
    rows.back().t_end = 6;
    rows.back().t_end_new = 6;
    CHECK(code_of([&] { validate_cohort(rows); }) == "NonCanonicalGrid");

    rows = base;
    rows.back().censored = true;
    CHECK(code_of([&] { validate_cohort(rows); }) == "CensoredAndDeath");

    CHECK(code_of([&] { validate_cohort({}); }) == "EmptyCohort");
}

TEST_CASE("validate_cohort: error names pin and row ordinal") {
    auto rows = expand_followup(raw_subject(5, false));
    rows[1].censored = true;
    try {
        validate_cohort(rows);
        FAIL("expected CohortError");
    } catch (const CohortError &e) {
        CHECK(e.pin() == "P1");
        CHECK(e.row() == 2);
    }
}

TEST_CASE("expand_followup: exit day 3 with death") {
    const auto rows = expand_followup(raw_subject(3, true));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].t_begin == -1);
    CHECK(rows[0].t_end == 1);
    CHECK(rows[1].t_end == 2);
    CHECK(rows[2].t_end == 3);
    CHECK(rows[2].death);
    CHECK_FALSE(rows[1].death);
}

TEST_CASE("expand_followup: death on day 30 lands in the (28, 56] block") {
    const auto rows = expand_followup(raw_subject(30, true));
    REQUIRE(rows.size() == 29);
    const auto &last = rows.back();
    CHECK(last.t_begin == 28);
    CHECK(last.t_end == 56);
    CHECK(last.t_end_new == 30);
    CHECK(last.death);
    CHECK_NOTHROW(validate_cohort(rows));
}

TEST_CASE("expand_followup: switch on day 5 censors") {
    const auto rows = expand_followup(raw_subject(100, true, 5));
    REQUIRE(rows.size() == 5);
    CHECK(rows.back().t_end_new == 5);
    CHECK(rows.back().censored);
    CHECK_FALSE(rows.back().death);
}

TEST_CASE("expand_followup: preconditions") {
    CHECK(code_of([] { expand_followup(raw_subject(0, false)); }) == "EmptyFollowup");
    auto raw = raw_subject(10, false, 11);
    CHECK(code_of([&] { expand_followup(raw); }) == "InvalidFollowup");
    raw = raw_subject(10, false);
    raw.transfusion_days = {3};
    CHECK(code_of([&] { expand_followup(raw); }) == "InvalidFollowup");
}

TEST_CASE("expand_followup: random followups validate and conserve follow-up") {
    std::mt19937_64 rng(20240601);
    for (int k = 0; k < 1000; ++k) {
        const auto raw = oracle::random_followup(rng, "R" + std::to_string(k));
        const auto rows = expand_followup(raw);
        REQUIRE_NOTHROW(validate_cohort(rows));
        const int end = raw.switch_day ? std::min(raw.exit_day, *raw.switch_day) : raw.exit_day;
        long length = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            length += (i + 1 == rows.size() ? rows[i].t_end_new : rows[i].t_end) - rows[i].t_begin;
        }
        CHECK(length == end + 1);
        const auto in_followup = std::count_if(raw.transfusion_days.begin(),
                                               raw.transfusion_days.end(),
                                               [end](int d) { return d <= end; });
        CHECK(rows.back().arm_total_cum == in_followup);
    }
}

TEST_CASE("parse_cohort: canonical file round-trips byte for byte") {
    std::ostringstream text;
    text << header;
    text << "A,0,2010,O+,H1,0,1,-1,1,1,0\n"
         << "A,0,2010,O+,H1,0,2,1,2,2,1\n"
         << "B,1,2011,A-,H2,0,1,-1,1,1,0\n"
         << "B,1,2011,A-,H2,1,2,1,2,2,0\n";
    std::istringstream in(text.str());
    const auto c = parse_cohort(in);
    CHECK(c.n_subjects() == 2);
    CHECK(c.hospital_levels() == std::vector<std::string>{"H1", "H2"});
    std::ostringstream out;
    write_cohort(out, c);
    CHECK(out.str() == text.str());
}

TEST_CASE("parse_cohort: ingestion errors") {
    std::string missing =
        "PIN,Arm,Transfusion_Year_first,Patient_ABORh,Hospital,Censored,Arm_Total_cum,t_begin,"
        "t_end,Death\nA,0,2010,O+,H1,0,1,-1,1,0\n";
    std::istringstream in1(missing);
    try {
        parse_cohort(in1);
        FAIL("expected MissingColumn");
    } catch (const InputError &e) {
        CHECK(e.code() == "MissingColumn");
        CHECK(std::string(e.what()).find("t_end_new") != std::string::npos);
    }

    std::istringstream in2(std::string(header) + "A,2,2010,O+,H1,0,1,-1,1,1,1\n");
    CHECK(code_of([&] { parse_cohort(in2); }) == "UnparsableCell");

    std::istringstream in3(std::string(header) + "A,0,20x0,O+,H1,0,1,-1,1,1,1\n");
    CHECK(code_of([&] { parse_cohort(in3); }) == "UnparsableCell");
}

TEST_CASE("parse_cohort: episode column splits a patient into clusters of one pin") {
    std::string text =
        "PIN,Arm,Transfusion_Year_first,Patient_ABORh,Hospital,Censored,Arm_Total_cum,t_begin,"
        "t_end,t_end_new,Death,Episode\n"
        "A,0,2010,O+,H1,0,1,-1,1,1,0,1\n"
        "A,0,2012,O+,H1,0,1,-1,1,1,1,2\n";
    std::istringstream in(text);
    const auto c = parse_cohort(in);
    CHECK(c.n_subjects() == 2);
    CHECK(c.cluster(0) == c.cluster(1));
}

TEST_CASE("summarize_cohort: two subjects with 341 and 2253 days") {
    auto a = raw_subject(341, false);
    auto b = raw_subject(2253, true);
    b.pin = "P2";
    b.arm = ArmCode::ExposedEverPregnant;
    const auto s = summarize_cohort(oracle::cohort_from({a, b}));
    CHECK(s.n_subjects == 2);
    CHECK(s.followup_median == doctest::Approx(1297.0));
    CHECK(s.person_time_years == doctest::Approx(2594.0 / 365.25));
    CHECK(fmt::format("{:.2f}", s.person_time_years) == "7.10");
    CHECK(s.n_deaths == 1);
    CHECK(s.subjects_by_arm.at(ArmCode::OtherMixed) == 0);
    CHECK(s.arm_percent(ArmCode::OtherMixed) == 0.0);
    CHECK(render_summary(s).find("0 (0%)") != std::string::npos);
}

TEST_CASE("summarize_cohort: single death is 100%") {
    const auto s = summarize_cohort(oracle::cohort_from({raw_subject(3, true)}));
    CHECK(s.n_deaths == 1);
    CHECK(s.death_percent() == doctest::Approx(100.0));
}
