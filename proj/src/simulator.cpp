#include "txmsm/simulator.hpp"

#include "txmsm/errors.hpp"
#include "txmsm/stats.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace txmsm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t subject_seed(std::uint64_t seed, std::string_view pin) {
    return splitmix64(splitmix64(seed) ^ fnv1a(pin));
}

template <typename Range> std::size_t draw_index(std::mt19937_64 &rng, const Range &probs) {
    std::discrete_distribution<std::size_t> d(std::begin(probs), std::end(probs));
    return d(rng);
}

RawFollowup simulate_subject(const SimScenario &s, const std::string &pin, bool &lost) {
    std::mt19937_64 rng(subject_seed(s.seed, pin));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    lost = unif(rng) < s.linkage_loss;
    std::vector<double> shares;
    for (const auto &h : s.hospitals) {
        shares.push_back(h.share);
    }
    const auto &hospital = s.hospitals[draw_index(rng, shares)];
    const auto &abo = s.blood_groups[draw_index(rng, s.blood_group_shares)];
    std::uniform_int_distribution<int> year_dist(s.year_min, s.year_max);
    const int year = year_dist(rng);
    const double u = s.frailty_sd * normal(rng);

    const double mid = 0.5 * (s.year_min + s.year_max);
    const std::array<double, 3> mix{
        hospital.arm_mix[0], hospital.arm_mix[1] * std::exp(s.arm_year_slope * (year - mid)),
        hospital.arm_mix[2]};
    constexpr ArmCode arms[] = {ArmCode::Reference, ArmCode::ExposedEverPregnant,
                                ArmCode::OtherMixed};
    const ArmCode arm = arms[draw_index(rng, mix)];

    RawFollowup raw;
    raw.pin = pin;
    raw.arm = arm;
    raw.transfusion_year_first = year;
    raw.patient_abo_rh = abo;
    raw.hospital = hospital.name;
    raw.exit_day = s.max_followup_days;

    const bool exposed = arm == ArmCode::ExposedEverPregnant;
    const double death_hazard =
        s.death_hazard_base * std::exp(s.true_log_hr * (exposed ? 1.0 : 0.0) +
                                       s.death_frailty_coef * u + hospital.death_log_hr);
    const double p_death = -std::expm1(-death_hazard);
    const double p_offarm = s.offarm_probability(arm);
    if (s.initial_extra_units > 0.0) {
        std::poisson_distribution<int> extra(s.initial_extra_units *
                                             std::exp(s.demand_frailty_coef * u));
        raw.transfusion_days.insert(raw.transfusion_days.end(), extra(rng), 0);
    }
    int exposed_units = exposed ? 1 : 0;
    for (int day = 1; day <= s.max_followup_days; ++day) {
        if (unif(rng) < p_death) {
            raw.exit_day = day;
            raw.death_at_exit = true;
            break;
        }
        const double demand = s.transfusion_demand_base *
                              std::exp(s.demand_frailty_coef * u + s.hb_dose_gap * (exposed ? 1.0 : 0.0) -
                                       s.demand_decay * day);
        if (unif(rng) < -std::expm1(-demand)) {
            raw.transfusion_days.push_back(day);
            if (p_offarm > 0.0 && unif(rng) < p_offarm) {
                raw.switch_day = day;
                raw.exit_day = day;
                break;
            }
            if (exposed) {
                ++exposed_units;
            }
        }
    }
    return raw;
}

std::string pin_for(std::size_t index) { return fmt::format("S{:07d}", index + 1); }

} // namespace

std::vector<RawFollowup> simulate_followups(const SimScenario &scenario) {
    scenario.validate();
    std::vector<RawFollowup> out;
    out.reserve(scenario.n_subjects);
    for (std::size_t i = 0; i < scenario.n_subjects; ++i) {
        bool lost = false;
        out.push_back(simulate_subject(scenario, pin_for(i), lost));
    }
    return out;
}

SimulatedCohort simulate_cohort(const SimScenario &scenario) {
    scenario.validate();
    std::vector<IntervalRow> rows;
    SimTruth truth;
    truth.true_log_hr = scenario.true_log_hr;
    truth.scenario_hash = scenario_hash(scenario);
    truth.n_simulated = scenario.n_subjects;
    for (std::size_t i = 0; i < scenario.n_subjects; ++i) {
        bool lost = false;
        const auto raw = simulate_subject(scenario, pin_for(i), lost);
        if (lost) {
            ++truth.n_lost;
            continue;
        }
        auto expanded = expand_followup(raw);
        rows.insert(rows.end(), std::make_move_iterator(expanded.begin()),
                    std::make_move_iterator(expanded.end()));
    }
    if (rows.empty()) {
        throw InputError("InvalidScenario", "linkage loss removed every subject");
    }

    std::vector<double> arm;
    std::vector<double> increment;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto &row = rows[r];
        if (row.arm == ArmCode::OtherMixed || row.t_begin == grid::origin ||
            row.t_end > grid::daily_horizon) {
            continue;
        }
        arm.push_back(row.arm == ArmCode::ExposedEverPregnant ? 1.0 : 0.0);
        increment.push_back(row.arm_total_cum - rows[r - 1].arm_total_cum);
    }
    if (arm.size() >= 2) {
        truth.feedback_correlation = stats::pearson_correlation(arm, increment);
    }
    return {validate_cohort(std::move(rows)), truth};
}

Cohort permutation_null(const Cohort &cohort, std::span<const std::string> columns,
                        std::uint64_t seed) {
    enum Column { arm, hospital, abo, year };
    std::vector<Column> selected;
    for (const auto &name : columns) {
        Column c;
        if (name == "Arm" || name == "arm") {
            c = arm;
        } else if (name == "Hospital" || name == "hospital") {
            c = hospital;
        } else if (name == "Patient_ABORh" || name == "blood_group") {
            c = abo;
        } else if (name == "Transfusion_Year_first" || name == "year") {
            c = year;
        } else {
            throw InputError("NonBaselineColumn",
                             fmt::format("'{}' is not a subject-level baseline column", name));
        }
        if (std::find(selected.begin(), selected.end(), c) == selected.end()) {
            selected.push_back(c);
        }
    }

    const std::size_t n = cohort.n_subjects();
    std::vector<IntervalRow> base(n);
    for (std::size_t s = 0; s < n; ++s) {
        base[s] = cohort.rows()[cohort.subject(s).begin];
    }
    std::vector<IntervalRow> donor = base;
    for (auto c : selected) {
        std::vector<std::size_t> perm(n);
        for (std::size_t s = 0; s < n; ++s) {
            perm[s] = s;
        }
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(c) + 1)));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t s = 0; s < n; ++s) {
            const auto &from = base[perm[s]];
            switch (c) {
            case arm:
                donor[s].arm = from.arm;
                break;
            case hospital:
                donor[s].hospital = from.hospital;
                break;
            case abo:
                donor[s].patient_abo_rh = from.patient_abo_rh;
                break;
            case year:
                donor[s].transfusion_year_first = from.transfusion_year_first;
                break;
            }
        }
    }

    std::vector<IntervalRow> rows = cohort.rows();
    std::vector<std::string> clusters;
    clusters.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        clusters.push_back(cohort.cluster(s));
        const auto range = cohort.subject(s);
        for (std::size_t r = range.begin; r < range.end; ++r) {
            rows[r].arm = donor[s].arm;
            rows[r].hospital = donor[s].hospital;
            rows[r].patient_abo_rh = donor[s].patient_abo_rh;
            rows[r].transfusion_year_first = donor[s].transfusion_year_first;
        }
    }
    return validate_cohort(std::move(rows), std::move(clusters));
}

void write_truth(std::ostream &out, const SimTruth &truth) {
    nlohmann::ordered_json j;
    j["true_log_hr"] = truth.true_log_hr;
    j["scenario_hash"] = truth.scenario_hash;
    j["feedback_correlation"] = truth.feedback_correlation;
    j["n_simulated"] = truth.n_simulated;
    j["n_lost"] = truth.n_lost;
    out << j.dump(2) << '\n';
}

} // namespace txmsm
