#pragma once

#include "opacity/io.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace opacity {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitInfeasible = 2,
    kExitNotConverged = 3,
    kExitNumerical = 4,
};

struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<EntropyMode> mode;
    /// Write wall-clock milliseconds into the log instead of 0.
    bool timing = false;
    bool quiet = false;
    /// grad-check only: perturb the analytic entropy gradient (negative control).
    bool corrupt_gradient = false;
};

/// Loads the config and applies the command-line overrides.
ExperimentConfig resolve_config(const CommandOptions& options);

int run_solve(const CommandOptions& options, std::ostream& out, std::ostream& err);
int run_grad_check(const CommandOptions& options, std::ostream& out, std::ostream& err);
int run_oracle_check(const CommandOptions& options, std::ostream& out, std::ostream& err);
int run_baseline_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int run_build_grid(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Dispatches by name and maps exceptions to exit codes with a message on `err`.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace opacity
