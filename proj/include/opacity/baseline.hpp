#pragma once

#include "opacity/entropy.hpp"
#include "opacity/hmm.hpp"
#include "opacity/mdp.hpp"

#include <cstdint>
#include <vector>

namespace opacity {

/// (1 - gamma) sum_t gamma^t P(S_t = .) under the chain started from mu0; needs gamma < 1.
Vec occupancy_measure(const InducedChain& chain, const Vec& mu0, double gamma);

struct BaselineConfig {
    double tau = 0.0;
    double step_size = 1.0;
    int iterations = 2000;
    /// Seeds the sampled opacity evaluation; the ascent itself is deterministic.
    std::uint64_t seed = 0;

    void validate() const;
};

/// Discounted value of R - tau ln pi from mu0, and its exact gradient.
struct RegularizedValue {
    double value = 0.0;
    Vec grad;
};

RegularizedValue regularized_value(const Mdp& mdp, const PolicyParams& theta, double tau);

/// Gradient ascent on the regularized value from the uniform policy.
PolicyParams entropy_regularized_solve(const Mdp& mdp, const BaselineConfig& config);

/// Occupancy-weighted per-state entropy of the policy, in bits.
double policy_entropy(const Mdp& mdp, const PolicyParams& theta);

/// How a baseline policy's opacity and value are scored.
struct BaselineEvaluation {
    int horizon = 10;
    double delta = 0.3;
    bool exact = false;
    int samples = 2000;
    std::uint64_t enumeration_cap = kDefaultEnumerationCap;
};

struct BaselineRow {
    double tau = 0.0;
    double policy_entropy = 0.0;
    double opacity_entropy = 0.0;
    double opacity_stderr = 0.0;
    double value = 0.0;
    bool feasible = false;
    PolicyParams theta{0, 0};
};

std::vector<BaselineRow> baseline_sweep(const Mdp& mdp, const ObservationModel& obs, const Objective& objective,
                                        const std::vector<double>& taus, const BaselineConfig& base,
                                        const BaselineEvaluation& eval);

}  // namespace opacity
