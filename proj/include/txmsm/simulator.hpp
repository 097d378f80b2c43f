#pragma once

#include "txmsm/data_model.hpp"
#include "txmsm/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace txmsm {

struct SimTruth {
    double true_log_hr = 0.0;
    std::string scenario_hash;
    /// Correlation, over daily rows of arms 0/1 after the first, between
    /// arm == 1 and the row's increment in Arm_Total_cum.
    double feedback_correlation = 0.0;
    std::size_t n_simulated = 0;
    std::size_t n_lost = 0;
};

struct SimulatedCohort {
    Cohort cohort;
    SimTruth truth;
};

/// Per-subject follow-up before grid expansion, in pin order, including
/// subjects later dropped by linkage loss.
std::vector<RawFollowup> simulate_followups(const SimScenario &scenario);

/// Deterministic in (scenario, seed); every subject draws from its own
/// generator seeded from (seed, pin).
SimulatedCohort simulate_cohort(const SimScenario &scenario);

/// Permutes each listed baseline column (Arm, Hospital, Patient_ABORh,
/// Transfusion_Year_first) independently across subjects. Throws InputError
/// NonBaselineColumn for any other column.
Cohort permutation_null(const Cohort &cohort, std::span<const std::string> columns,
                        std::uint64_t seed);

void write_truth(std::ostream &out, const SimTruth &truth);

} // namespace txmsm
