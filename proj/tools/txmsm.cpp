#include "txmsm/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
    CLI::App app{"Target-trial analyses of transfusion cohorts: restriction, time-varying Cox "
                 "and IPW marginal structural models"};
    app.require_subcommand(1);

    txmsm::RunConfig config;
    bool no_hospital = false;
    bool no_blood_group = false;
    bool no_year = false;

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--output-dir", config.output_dir, "Directory for output files");
        cmd->add_option("--seed", config.seed, "Random seed");
    };
    auto add_analysis = [&](CLI::App *cmd) {
        cmd->add_option("--truncate", config.truncate, "Cap combined weights at this value")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--no-hospital", no_hospital, "Drop hospital from the models");
        cmd->add_flag("--no-blood-group", no_blood_group, "Drop blood group from the models");
        cmd->add_flag("--no-year", no_year, "Drop calendar year from the models");
        cmd->add_flag("--spline-hospital-interaction", config.pipeline.spline_hospital_interaction,
                      "Add the Arm_Total_cum spline x hospital interaction");
        cmd->add_flag("--small-sample-correction", config.pipeline.small_sample_correction,
                      "Scale the cluster-robust covariance by G/(G-1)");
    };

    auto *analyze = app.add_subcommand("analyze", "Run the analyses on a cohort file");
    analyze->add_option("--input", config.input, "Cohort CSV")->required();
    analyze->add_option("--method", config.method, "restriction|timevarying|ipw|all")
        ->check(CLI::IsMember({"restriction", "timevarying", "ipw", "all"}));
    add_common(analyze);
    add_analysis(analyze);

    auto *simulate = app.add_subcommand("simulate", "Simulate a cohort from a scenario");
    simulate->add_option("--scenario", config.scenario, "Scenario file (default built-in)");
    add_common(simulate);

    auto *anonymize = app.add_subcommand("anonymize", "Permute baseline columns across subjects");
    anonymize->add_option("--input", config.input, "Cohort CSV")->required();
    anonymize->add_option("--columns", config.permute_columns, "Columns to permute (default Arm)");
    add_common(anonymize);

    auto *diagnose = app.add_subcommand("diagnose", "Weight percentiles and per-time distributions");
    diagnose->add_option("--input", config.input, "Cohort CSV")->required();
    diagnose->add_option("--binwidth", config.binwidth, "Bin width in days")->check(CLI::PositiveNumber);
    diagnose->add_option("--horizon", config.horizon, "Last day covered by the bins")
        ->check(CLI::PositiveNumber);
    add_common(diagnose);
    add_analysis(diagnose);

    auto *compare = app.add_subcommand("compare", "Replication study over simulated cohorts");
    compare->add_option("--scenario", config.scenario, "Scenario file (default built-in)");
    compare->add_option("--replications", config.replications, "Number of replicates")
        ->check(CLI::PositiveNumber);
    add_common(compare);
    add_analysis(compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int status = app.exit(e);
        return status == 0 ? txmsm::exit_success : txmsm::exit_input;
    }

    config.command = app.get_subcommands().front()->get_name();
    config.pipeline.hospital = !no_hospital;
    config.pipeline.blood_group = !no_blood_group;
    config.pipeline.year = !no_year;
    config.pipeline.iptw = {!no_year, !no_blood_group, !no_hospital};
    return txmsm::run_command(config, std::cout, std::cerr);
}
