#include "txmsm/commands.hpp"

#include "txmsm/errors.hpp"
#include "txmsm/report.hpp"
#include "txmsm/simulator.hpp"
#include "txmsm/stats.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace txmsm {

namespace fs = std::filesystem;

std::vector<Method> parse_methods(const std::string &name) {
    if (name == "restriction") {
        return {Method::restriction};
    }
    if (name == "timevarying" || name == "time_varying") {
        return {Method::time_varying};
    }
    if (name == "ipw" || name == "ipw_msm") {
        return {Method::ipw_msm};
    }
    if (name == "all") {
        return {Method::restriction, Method::time_varying, Method::ipw_msm};
    }
    throw InputError("UnknownMethod",
                     fmt::format("unknown method '{}' (restriction|timevarying|ipw|all)", name));
}

namespace {

void require_input(const RunConfig &config) {
    if (config.input.empty()) {
        throw InputError("MissingInput", fmt::format("'{}' needs --input", config.command));
    }
}

fs::path output_path(const RunConfig &config, const std::string &name) {
    if (config.output_dir.empty()) {
        throw InputError("MissingOutput", "--output-dir must not be empty");
    }
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) {
        throw InputError("UnwritableOutput", fmt::format("cannot create '{}': {}",
                                                         config.output_dir, ec.message()));
    }
    return fs::path(config.output_dir) / name;
}

std::ofstream open_output(const fs::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("UnwritableOutput", fmt::format("cannot write '{}'", path.string()));
    }
    return out;
}

PipelineConfig pipeline_config(const RunConfig &config) {
    PipelineConfig p = config.pipeline;
    if (config.truncate) {
        p.truncation_cap = *config.truncate;
    }
    return p;
}

nlohmann::ordered_json percentile_json(const WeightSeries &w) {
    auto j = to_json(w.percentiles);
    j["n"] = w.size();
    j["n_extreme"] = w.extreme_rows.size();
    if (w.truncation_cap) {
        j["truncation_cap"] = *w.truncation_cap;
    }
    if (w.untruncated_percentiles) {
        j["untruncated"] = to_json(*w.untruncated_percentiles);
    }
    return j;
}

} // namespace

void cmd_analyze(const RunConfig &config, std::ostream &out) {
    require_input(config);
    const auto methods = parse_methods(config.method);
    const Cohort cohort = read_cohort(config.input);
    const auto pipeline = pipeline_config(config);
    std::vector<AnalysisReport> reports;
    for (auto m : methods) {
        reports.push_back(run_method(m, cohort, pipeline));
    }
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto &r : reports) {
        j.push_back(to_json(r));
    }
    open_output(output_path(config, "report.json")) << j.dump(2) << '\n';
    const auto table = render_table2(reports);
    open_output(output_path(config, "table2.txt")) << table;
    out << table;
    for (const auto &r : reports) {
        for (const auto &note : r.notes) {
            out << fmt::format("note [{}]: {}\n", to_string(r.method), note);
        }
    }
}

SimScenario resolve_scenario(const RunConfig &config) {
    SimScenario s = config.scenario.empty() ? default_scenario() : read_scenario(config.scenario);
    if (config.seed) {
        s.seed = *config.seed;
    }
    s.validate();
    return s;
}

void cmd_simulate(const RunConfig &config, std::ostream &out) {
    const auto scenario = resolve_scenario(config);
    const auto sim = simulate_cohort(scenario);
    write_cohort(output_path(config, "cohort.csv"), sim.cohort);
    auto truth = open_output(output_path(config, "truth.json"));
    write_truth(truth, sim.truth);
    out << render_summary(summarize_cohort(sim.cohort));
    out << fmt::format("scenario hash {}, true log HR {}\n", sim.truth.scenario_hash,
                       sim.truth.true_log_hr);
}

void cmd_anonymize(const RunConfig &config, std::ostream &out) {
    require_input(config);
    const Cohort cohort = read_cohort(config.input);
    const Cohort permuted = permutation_null(cohort, config.permute_columns, config.seed.value_or(1));
    write_cohort(output_path(config, "cohort_anonymized.csv"), permuted);
    out << fmt::format("permuted {} across {} subjects\n",
                       fmt::join(config.permute_columns, ", "), permuted.n_subjects());
}

void cmd_diagnose(const RunConfig &config, std::ostream &out) {
    require_input(config);
    const Cohort cohort = read_cohort(config.input);
    const auto pipeline = pipeline_config(config);
    const WeightSeries iptw_all = iptw_point(cohort, pipeline.iptw);
    const auto rows = comparison_rows(cohort);
    if (rows.empty()) {
        throw InputError("NoAnalysisRows", "the cohort has no subjects in arms 0/1");
    }
    const WeightSeries iptw = subset_rows(iptw_all, rows);
    const WeightSeries ipcw = ipcw_survival(cohort, rows, iptw.values);
    const WeightSeries combined = combine_and_truncate(iptw, ipcw, pipeline.truncation_cap);

    nlohmann::ordered_json j;
    for (const auto *w : {&iptw_all, &ipcw, &combined}) {
        const std::string name(to_string(w->kind == WeightKind::truncated ? WeightKind::combined : w->kind));
        j[name] = percentile_json(*w);
        const auto bins = weight_distribution_by_time(*w, cohort, config.binwidth, config.horizon);
        auto file = open_output(output_path(config, fmt::format("weights_{}_by_time.csv", name)));
        write_weight_bins(file, bins);
    }
    j["warnings"] = combined.warnings;
    open_output(output_path(config, "weight_percentiles.json")) << j.dump(2) << '\n';
    for (const auto &[name, p] : j.items()) {
        if (name == "warnings") {
            continue;
        }
        out << fmt::format("{:<9} min {:.4f}  p0.5 {:.4f}  p99.5 {:.4f}  max {:.4f}  mean {:.4f}\n",
                           name, p["min"].get<double>(), p["p005"].get<double>(),
                           p["p995"].get<double>(), p["max"].get<double>(),
                           p["mean"].get<double>());
    }
}

std::uint64_t replicate_seed(std::uint64_t base, std::size_t replicate) {
    std::uint64_t x = base + 0x9e3779b97f4a7c15ULL * (replicate + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

ComparisonStudy run_comparison(const SimScenario &scenario, std::size_t replications,
                               const PipelineConfig &config) {
    if (replications == 0) {
        throw InputError("InvalidReplications", "--replications must be at least 1");
    }
    ComparisonStudy study;
    study.true_log_hr = scenario.true_log_hr;
    study.scenario_hash = scenario_hash(scenario);
    for (std::size_t r = 0; r < replications; ++r) {
        SimScenario s = scenario;
        s.seed = replicate_seed(scenario.seed, r);
        const auto sim = simulate_cohort(s);
        ReplicateResult rep;
        rep.seed = s.seed;
        for (auto m : all_methods) {
            try {
                rep.reports.push_back(run_method(m, sim.cohort, config));
            } catch (const Error &e) {
                rep.reports.emplace_back();
                rep.failures.push_back(fmt::format("{}: {}", to_string(m), e.what()));
            }
        }
        study.replicates.push_back(std::move(rep));
    }
    for (std::size_t k = 0; k < std::size(all_methods); ++k) {
        MethodSummary sum;
        sum.method = all_methods[k];
        std::vector<double> log_hr;
        std::vector<double> se;
        std::size_t covered = 0;
        for (const auto &rep : study.replicates) {
            const auto &r = rep.reports[k];
            if (!r) {
                ++sum.n_failed;
                continue;
            }
            log_hr.push_back(r->log_hr);
            se.push_back(r->robust_se);
            const double truth = std::exp(study.true_log_hr);
            covered += (r->ci_low <= truth && truth <= r->ci_high) ? 1 : 0;
        }
        sum.n_ok = log_hr.size();
        if (sum.n_ok > 0) {
            sum.mean_log_hr = stats::mean(log_hr);
            sum.empirical_se = stats::sd(log_hr);
            sum.mean_robust_se = stats::mean(se);
            sum.coverage = static_cast<double>(covered) / static_cast<double>(sum.n_ok);
        }
        study.summaries.push_back(sum);
    }
    return study;
}

void cmd_compare(const RunConfig &config, std::ostream &out) {
    const auto scenario = resolve_scenario(config);
    const auto study = run_comparison(scenario, config.replications, pipeline_config(config));

    nlohmann::ordered_json j;
    j["scenario_hash"] = study.scenario_hash;
    j["true_log_hr"] = study.true_log_hr;
    j["replications"] = study.replicates.size();
    j["methods"] = nlohmann::ordered_json::array();
    for (const auto &s : study.summaries) {
        j["methods"].push_back({{"method", std::string(to_string(s.method))},
                                {"n_ok", s.n_ok},
                                {"n_failed", s.n_failed},
                                {"mean_log_hr", s.mean_log_hr},
                                {"bias", s.mean_log_hr - study.true_log_hr},
                                {"empirical_se", s.empirical_se},
                                {"mean_robust_se", s.mean_robust_se},
                                {"coverage", s.coverage}});
    }
    j["replicates"] = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < study.replicates.size(); ++r) {
        const auto &rep = study.replicates[r];
        nlohmann::ordered_json row;
        row["replicate"] = r + 1;
        row["seed"] = rep.seed;
        for (std::size_t k = 0; k < rep.reports.size(); ++k) {
            const std::string name(to_string(all_methods[k]));
            if (rep.reports[k]) {
                row[name] = {{"log_hr", rep.reports[k]->log_hr},
                             {"robust_se", rep.reports[k]->robust_se}};
            } else {
                row[name] = nullptr;
            }
        }
        row["failures"] = rep.failures;
        j["replicates"].push_back(row);
    }
    open_output(output_path(config, "compare.json")) << j.dump(2) << '\n';

    std::string text = fmt::format("{} replicate(s), true log HR {}\n", study.replicates.size(),
                                   study.true_log_hr);
    text += fmt::format("{:<14}{:>6}{:>14}{:>10}{:>14}{:>10}\n", "Method", "ok", "mean log HR",
                        "bias", "empirical SE", "coverage");
    for (const auto &s : study.summaries) {
        text += fmt::format("{:<14}{:>6}{:>14.4f}{:>10.4f}{:>14.4f}{:>10.3f}\n",
                            method_label(s.method), s.n_ok, s.mean_log_hr,
                            s.mean_log_hr - study.true_log_hr, s.empirical_se, s.coverage);
    }
    open_output(output_path(config, "compare.txt")) << text;
    out << text;
}

int run_command(const RunConfig &config, std::ostream &out, std::ostream &err) {
    try {
        if (config.command == "analyze") {
            cmd_analyze(config, out);
        } else if (config.command == "simulate") {
            cmd_simulate(config, out);
        } else if (config.command == "anonymize") {
            cmd_anonymize(config, out);
        } else if (config.command == "diagnose") {
            cmd_diagnose(config, out);
        } else if (config.command == "compare") {
            cmd_compare(config, out);
        } else {
            throw InputError("UnknownCommand", fmt::format("unknown command '{}'", config.command));
        }
        return exit_success;
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return e.category() == ErrorCategory::input ? exit_input : exit_numerical;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << '\n';
        return exit_internal;
    }
}

} // namespace txmsm
