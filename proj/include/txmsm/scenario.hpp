#pragma once

#include "txmsm/data_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace txmsm {

struct HospitalSpec {
    std::string name;
    double share = 1.0;
    /// Probabilities of arm 0, 1 and 9 for a first transfusion at this hospital.
    std::array<double, 3> arm_mix{0.7, 0.15, 0.15};
    /// Log hazard ratio of death relative to a hospital with 0.
    double death_log_hr = 0.0;
};

/// Generative parameters for a simulated cohort. Time is in days; every
/// hazard is per day.
struct SimScenario {
    std::size_t n_subjects = 2000;
    std::uint64_t seed = 1;
    /// Log hazard ratio of death for arm 1 versus arm 0.
    double true_log_hr = 0.0;
    /// Standard deviation of the normal frailty U.
    double frailty_sd = 1.0;
    double death_hazard_base = 5e-4;
    /// Death log-hazard per unit of U.
    double death_frailty_coef = -1.5;
    double transfusion_demand_base = 0.01;
    /// Transfusion log-demand per unit of U.
    double demand_frailty_coef = 0.3;
    /// Exponential decline of demand with time since the first transfusion.
    double demand_decay = 0.0;
    /// Mean number of further units on day 0 at U = 0 (Poisson, scaled like demand).
    double initial_extra_units = 1.0;
    /// Extra log-demand while receiving units from ever-pregnant donors.
    double hb_dose_gap = 0.45;
    /// Chance that a further unit comes from outside the subject's first-unit
    /// category (which ends adherent follow-up), per arm.
    double offarm_prob = 0.1;
    std::optional<double> offarm_prob_arm0;
    std::optional<double> offarm_prob_arm1;
    int max_followup_days = 365;
    std::vector<HospitalSpec> hospitals;
    std::vector<std::string> blood_groups;
    std::vector<double> blood_group_shares;
    int year_min = 2005;
    int year_max = 2015;
    /// Change per calendar year (from the midpoint) in the log odds of arm 1 vs arm 0.
    double arm_year_slope = 0.0;
    /// Probability that a subject is dropped from the emitted cohort.
    double linkage_loss = 0.0;

    double offarm_probability(ArmCode arm) const;
    /// Throws InputError InvalidScenario.
    void validate() const;
};

SimScenario default_scenario();

/// Flat "key = value" text, '#' comments; keys absent from the text keep
/// their default_scenario() values.
SimScenario parse_scenario(std::istream &in, const std::string &source = "<stream>");
SimScenario read_scenario(const std::filesystem::path &path);

/// Canonical text: every key, fixed order, shortest round-trip numbers.
std::string serialize_scenario(const SimScenario &scenario);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string scenario_hash(const SimScenario &scenario);

} // namespace txmsm
