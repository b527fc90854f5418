#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "collapse/experiments.hpp"

namespace {

// machine-readable report on stdout; exit 0 when clean, 1 otherwise
int report_violations(const std::string& stage, const std::vector<collapse::Violation>& v) {
    nlohmann::json out;
    out["stage"] = stage;
    out["valid"] = v.empty();
    out["violations"] = nlohmann::json::array();
    for (const auto& item : v)
        out["violations"].push_back({{"name", item.name}, {"message", item.message}});
    std::cout << out.dump(2) << "\n";
    return v.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"collapse-lab: stochastic collapse-model experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0, trajectories = 0, workers = 0;
    std::string out_dir;

    CLI::App* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
    run_cmd->add_option("config", config_path, "INI config file")->required();
    CLI::Option* seed_opt = run_cmd->add_option("--seed", seed, "override run.seed");
    CLI::Option* traj_opt =
        run_cmd->add_option("--trajectories", trajectories, "override run.trajectories");
    CLI::Option* out_opt = run_cmd->add_option("--out", out_dir, "override run.output_dir");
    CLI::Option* workers_opt = run_cmd->add_option("--workers", workers, "override run.workers");

    CLI::App* validate_cmd =
        app.add_subcommand("validate", "check a config without running anything");
    validate_cmd->add_option("config", config_path, "INI config file")->required();

    CLI::App* list_cmd =
        app.add_subcommand("list-experiments", "print the registered experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (list_cmd->parsed()) {
            for (const auto& info : collapse::list_experiments())
                std::printf("%-20s %s\n", info.name.c_str(), info.summary.c_str());
            return 0;
        }

        collapse::ConfigMap config;
        try {
            config = collapse::load_config_file(config_path);
        } catch (const std::exception& e) {
            return report_violations("parse", {{"parse-error", e.what()}});
        }

        if (validate_cmd->parsed())
            return report_violations("validate", collapse::validate_config(config));

        collapse::RunOverrides overrides;
        if (seed_opt->count()) overrides.seed = seed;
        if (traj_opt->count()) overrides.trajectories = trajectories;
        if (out_opt->count()) overrides.out_dir = out_dir;
        if (workers_opt->count()) overrides.workers = workers;

        collapse::RunReport report = collapse::run_experiment(config, overrides);
        if (!report.violations.empty())
            return report_violations("validate", report.violations);

        for (const auto& inv : report.invariants)
            std::printf("%-28s %s  measured %.6g  threshold %.6g\n", inv.name.c_str(),
                        inv.pass ? "pass" : "FAIL", inv.measured, inv.threshold);
        std::printf("wrote %s/{moments.csv,outcomes.csv,summary.json,manifest.json}\n",
                    report.out_dir.c_str());
        std::printf("overall: %s\n", report.overall_pass ? "pass" : "FAIL");
        return report.overall_pass ? 0 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
