#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "commands.hpp"

using namespace rtrw;
using namespace rtrw::cli;

namespace {

void print_reports(const CommandResult& res) {
    for (const auto& r : res.reports) {
        std::cout << "[" << to_string(r.verdict) << "] " << r.statistic << " = " << format_double(r.value) << " ("
                  << r.comparison << " " << format_double(r.threshold);
        if (r.comparison == "in") std::cout << " around " << format_double(r.target);
        std::cout << ")";
        if (!r.note.empty()) std::cout << "  " << r.note;
        std::cout << "\n";
    }
    if (!res.summary.empty()) std::cout << res.summary << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomly trapped random walks: simulation, scaling limits and diagnostics"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    bool strict = false;
    app.add_option("--config", config_path, "Experiment config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Master seed (overrides [run] seed)");
    app.add_option("--workers", workers, "Worker threads (overrides [run] workers)")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory (overrides [run] out)");
    app.add_flag("--strict", strict, "Exit with status 2 when any verdict fails");

    auto* simulate = app.add_subcommand("simulate", "Simulate walks or limit processes and write trajectories");
    auto* simulate_limit = app.add_subcommand("simulate-limit", "Sample a scaling-limit process");
    auto* verify = app.add_subcommand("verify-comb", "Cross-check the comb generating function, moments and tanh limit");
    auto* scan = app.add_subcommand("phase-scan", "Classify a grid of (alpha, beta) cells by simulation");
    auto* assumptions = app.add_subcommand("assumptions", "Check the convergence hypotheses for one model point");
    auto* report = app.add_subcommand("report", "Verify an output directory against its manifest and list reports");
    for (auto* sub : {simulate, simulate_limit, verify, scan, assumptions, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
        if (seed) cfg.seed = *seed;
        if (workers) cfg.workers = *workers;
        if (out) cfg.out = *out;
        cfg.validate();

        CommandResult res;
        if (*simulate) res = cmd_simulate(cfg);
        else if (*simulate_limit) res = cmd_simulate(cfg, true);
        else if (*verify) res = cmd_verify_comb(cfg);
        else if (*scan) res = cmd_phase_scan(cfg);
        else if (*assumptions) res = cmd_assumptions(cfg);
        else res = cmd_report(cfg);
        print_reports(res);
        return strict && res.any_failed() ? kVerdict : kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}
