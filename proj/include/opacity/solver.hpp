#pragma once

#include "opacity/entropy.hpp"
#include "opacity/hmm.hpp"
#include "opacity/mdp.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opacity {

struct Problem {
    Mdp mdp;
    ObservationModel obs;
    Objective objective;
};

enum class EntropyMode { Exact, Sampled };
enum class ValueHorizon { Finite, Infinite };
/// Expected: V from mu0. WorstCase: the smallest V over the support of mu0.
enum class ValueStart { Expected, WorstCase };
enum class ValueEstimator { Exact, Reinforce };

struct SolverConfig {
    double eta = 0.1;
    double kappa = 0.05;
    /// -infinity disables the constraint and pins lambda at 0.
    double delta = 0.3;
    int horizon = 10;
    int samples = 2000;
    int iterations = 2000;
    std::uint64_t seed = 0;
    EntropyMode mode = EntropyMode::Sampled;
    double lambda0 = 1.0;
    /// Empty means theta = 0 (uniform policy).
    std::optional<PolicyParams> theta0;

    double grad_tol = 1e-4;
    double slack_tol = 1e-3;
    int window = 50;

    ValueHorizon value_horizon = ValueHorizon::Finite;
    ValueStart value_start = ValueStart::Expected;
    ValueEstimator value_estimator = ValueEstimator::Exact;
    int value_episodes = 2000;

    /// Halve eta until the Lagrangian does not drop (exact mode only).
    bool backtrack = false;
    std::uint64_t enumeration_cap = kDefaultEnumerationCap;
    GradientEngine engine = GradientEngine::Adjoint;
    /// Sequences used for the final report in sampled mode.
    int eval_samples = 20000;

    bool constrained() const { return delta > -std::numeric_limits<double>::infinity(); }
    void validate() const;
};

/// Entropy, value, and their gradients at one theta.
struct Evaluation {
    EntropyEstimate entropy;
    double value = 0.0;
    Vec value_grad;
};

/// Sampled estimates draw from the sub-streams `stream` and `stream`.value of
/// config.seed at position `index`; `samples` overrides config.samples.
Evaluation evaluate(const Problem& problem, const PolicyParams& theta, const SolverConfig& config,
                    std::string_view stream, std::uint64_t index, int samples);

/// grad H + lambda grad V, with the estimates of `evaluate(.., "iteration", index, config.samples)`.
Vec lagrangian_gradient(const Problem& problem, const PolicyParams& theta, double lambda, const SolverConfig& config,
                        std::uint64_t index = 0);

/// Projected dual step max(0, lambda - kappa (V - delta)).
double dual_step(double lambda, double kappa, double value, double delta);

struct IterationRecord {
    int iteration = 0;
    double entropy = 0.0;
    double entropy_stderr = 0.0;
    double value = 0.0;
    double lambda = 0.0;
    double grad_norm = 0.0;
    double elapsed_ms = 0.0;
};

struct TrainLog {
    SolverConfig config;
    std::vector<IterationRecord> records;
    PolicyParams final_theta{0, 0};
    double final_lambda = 0.0;
    bool converged = false;
    bool aborted = false;
    std::string abort_reason;
    /// Evaluation of final_theta (larger sample in sampled mode).
    double final_entropy = 0.0;
    double final_entropy_stderr = 0.0;
    double final_value = 0.0;
    bool feasible = false;
};

/// Called after each record is appended; lets callers stream the log.
using RecordSink = std::function<void(const IterationRecord&)>;

TrainLog solve(const Problem& problem, const SolverConfig& config, const RecordSink& sink = {});

}  // namespace opacity
