#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "collapse/error.hpp"
#include "collapse/output.hpp"
#include "collapse/run.hpp"

using namespace collapse;

namespace {

void write_error(const std::string& dir, const json& report)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return;
    try {
        emit_report_json(report, (std::filesystem::path(dir) / "error.json").string());
    } catch (const Error&) {
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"collapse-lab: stochastic collapse-model experiments"};
    std::string experiment, config;
    std::optional<std::uint64_t> seed;
    std::optional<int> realizations;
    std::optional<std::string> out;
    bool svg = false;
    std::string names;
    for (const auto& n : experiment_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("experiment", experiment, "one of: " + names)->required();
    app.add_option("--config", config, "JSON configuration file")->required();
    app.add_option("--seed", seed, "base seed override");
    app.add_option("--realizations", realizations, "ensemble size override");
    app.add_option("--out", out, "output directory override");
    app.add_flag("--svg", svg, "also write SVG charts");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return e.get_exit_code() == 0 ? rc : kExitUsage;
    }

    Overrides ov{experiment, seed, realizations, out};
    RunConfig cfg;
    try {
        cfg = parse_config(config, ov);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }
    try {
        RunOutcome res = run(cfg, svg);
        for (const auto& c : res.report["criteria"])
            std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " "
                      << format_number(c["value"].is_number() ? c["value"].get<double>() : NAN) << " "
                      << c["relation"].get<std::string>() << " " << format_number(c["threshold"].get<double>())
                      << "\n";
        std::cout << (res.pass ? "pass" : "criteria-fail") << " (" << cfg.out_dir << ")\n";
        return res.pass ? kExitPass : kExitCriteriaFail;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        write_error(cfg.out_dir, error_report(cfg.experiment, e.code(), e.what()));
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "runtime-error: " << e.what() << "\n";
        write_error(cfg.out_dir, error_report(cfg.experiment, "runtime-error", e.what()));
        return kExitRuntime;
    }
}
