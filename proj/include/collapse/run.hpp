#pragma once

#include <optional>
#include <string>
#include <vector>

#include "collapse/config.hpp"

namespace collapse {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCriteriaFail = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct RunOutcome {
    bool pass = false;
    json report;
    std::vector<std::string> files;  // written, relative to the output directory
};

// Exit code for an error raised while running: configuration faults are usage errors.
int exit_code_for(const std::string& error_code);

// Runs the experiment and writes its artifacts into cfg.out_dir.
RunOutcome run(const RunConfig& cfg, bool svg = false);

// Module that owns an experiment, for error reports.
std::string experiment_module(const std::string& experiment);

// Error report written when a run aborts.
json error_report(const std::string& experiment, const std::string& code, const std::string& message);

// Per-seed sup over window nodes of |<psi|psi>_t - 1| with the commutator inner product.
std::vector<double> conservation_deviations(const TemporalModelSpec& spec, const StateVector& psi0,
                                            const TimeGrid& grid, int seeds, std::uint64_t base_seed,
                                            const DysonOptions& opts);

// Exact off-diagonal decay when every M and H0 is diagonal; empty otherwise.
std::vector<GeneralOperator> spatial_closed_form(const SpatialModelSpec& spec, const GeneralOperator& sigma0,
                                                 const TimeGrid& grid);

// gamma in closed form when one exists for the kernel: g^2/4 for real even
// profiles, g^2 sin^2(omega ell) / (4 omega^2 ell^2) for a modulated box.
std::optional<double> gamma_closed_form(const KernelProfile& k);

}  // namespace collapse
