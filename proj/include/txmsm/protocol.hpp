#pragma once

#include "txmsm/data_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace txmsm {

/// The seven components of an emulated target trial.
struct ProtocolSpec {
    std::string eligibility;
    std::string treatment_strategies;
    std::string assignment;
    std::string time_zero;
    std::string follow_up_end;
    std::string outcome;
    std::string causal_contrast;

    /// The transfusion donor-sex protocol the cohort schema encodes.
    static ProtocolSpec canonical();
};

/// Findings (never errors) about an incomplete protocol or cohort rows that
/// the protocol cannot represent: time zero off the -1 origin, arm changing
/// after time zero, censoring that is not terminal. Rows need not validate.
std::vector<std::string> check_protocol(const ProtocolSpec &protocol,
                                        std::span<const IntervalRow> rows);

std::vector<std::string> check_protocol(const ProtocolSpec &protocol, const Cohort &cohort);

} // namespace txmsm
