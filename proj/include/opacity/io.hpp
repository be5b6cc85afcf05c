#pragma once

#include "opacity/baseline.hpp"
#include "opacity/gridworld.hpp"
#include "opacity/random_model.hpp"
#include "opacity/solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opacity {

/// A model plus its observation channel, as read from a model document.
struct ModelDocument {
    Mdp mdp;
    ObservationModel obs;
};

/**
 * Model document (JSON):
 *
 *   { "states": 3 | ["s0", ...], "actions": 2 | ["left", ...],
 *     "transitions": [[i, a, j, p], ...],      sparse; missing entries are 0
 *     "initial": [mu0(0), ...],
 *     "rewards": [[R(0,0), R(0,1)], ...],      N rows of K entries
 *     "discount": 0.95,
 *     "observations": ["0", "b", ...],
 *     "emissions": [[state, "symbol", p], ...] }
 *
 * Rows off by at most 1e-9 are renormalized; larger defects are rejected.
 */
ModelDocument parse_model_document(std::string_view text, const std::string& source);
ModelDocument load_model_document(const std::filesystem::path& path);
std::string write_model_document(const Mdp& mdp, const ObservationModel& obs);

struct ModelSource {
    enum class Kind { Grid, File, Inline, Random };
    Kind kind = Kind::Grid;
    GridSpec grid = GridSpec::default_layout();
    std::string file;                    ///< Kind::File, relative to the config's directory
    std::optional<ModelDocument> inline_model;  ///< Kind::Inline
    RandomModelSpec random;              ///< Kind::Random
};

struct ObjectiveConfig {
    Objective::Kind kind = Objective::Kind::LastState;
    /// Secret state indices; for grid models an absent list means the grid's secret cells.
    std::optional<std::vector<Index>> secret_states;
};

struct SweepConfig {
    std::vector<double> taus;
    BaselineConfig base;
};

struct ExperimentConfig {
    ModelSource model;
    ObjectiveConfig objective;
    SolverConfig solver;
    std::optional<SweepConfig> baseline;
    std::string output_prefix = "out/run";
    /// Directory that relative paths resolve against; not part of the document.
    std::filesystem::path base_dir = ".";
};

ExperimentConfig parse_config(std::string_view text, const std::string& source);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical document with every default spelled out.
std::string serialize_config(const ExperimentConfig& config, bool pretty = true);
/// FNV-1a of the compact canonical document, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Model, observation channel, and objective described by the config.
Problem build_problem(const ExperimentConfig& config);

}  // namespace opacity
