#include "txmsm/protocol.hpp"

#include <fmt/format.h>

#include <utility>

namespace txmsm {

ProtocolSpec ProtocolSpec::canonical() {
    return {
        "adult patients receiving a first red blood cell transfusion",
        "units exclusively from male donors (arm 0) versus exclusively from ever-pregnant female "
        "donors (arm 1); any other first unit is arm 9",
        "exposure category of the first transfused unit",
        "first transfusion (day 0 within the interval starting at -1)",
        "death, first transfusion outside the initial exposure category, or end of data",
        "all-cause mortality",
        "per-protocol hazard ratio, sustained arm 1 versus sustained arm 0",
    };
}

std::vector<std::string> check_protocol(const ProtocolSpec &p, std::span<const IntervalRow> rows) {
    std::vector<std::string> findings;
    const std::pair<const std::string *, const char *> components[] = {
        {&p.eligibility, "eligibility"},
        {&p.treatment_strategies, "treatment strategies"},
        {&p.assignment, "treatment assignment"},
        {&p.time_zero, "time zero"},
        {&p.follow_up_end, "follow-up end"},
        {&p.outcome, "outcome"},
        {&p.causal_contrast, "causal contrast"},
    };
    for (const auto &[value, name] : components) {
        if (value->find_first_not_of(" \t\r\n") == std::string::npos) {
            findings.push_back(fmt::format("incomplete protocol: {}", name));
        }
    }

    std::size_t begin = 0;
    while (begin < rows.size()) {
        std::size_t end = begin + 1;
        while (end < rows.size() && rows[end].pin == rows[begin].pin) {
            ++end;
        }
        const auto &pin = rows[begin].pin;
        if (rows[begin].t_begin != grid::origin) {
            findings.push_back(fmt::format(
                "time zero violated: subject '{}' starts at t_begin={} instead of {}", pin,
                rows[begin].t_begin, grid::origin));
        }
        for (std::size_t r = begin + 1; r < end; ++r) {
            if (rows[r].arm != rows[begin].arm) {
                findings.push_back(fmt::format(
                    "assignment at time zero violated: subject '{}' changes arm from {} to {} at "
                    "row {}",
                    pin, to_int(rows[begin].arm), to_int(rows[r].arm), r + 1));
                break;
            }
        }
        for (std::size_t r = begin; r + 1 < end; ++r) {
            if (rows[r].censored) {
                findings.push_back(fmt::format(
                    "adherence censoring not terminal: subject '{}' has follow-up after censoring "
                    "at row {}",
                    pin, r + 1));
                break;
            }
        }
        begin = end;
    }
    return findings;
}

std::vector<std::string> check_protocol(const ProtocolSpec &protocol, const Cohort &cohort) {
    return check_protocol(protocol, cohort.rows());
}

} // namespace txmsm
