#pragma once

#include "opacity/hmm.hpp"
#include "opacity/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace opacity {

/// Secret set E for last-state opacity.
struct SecretSpec {
    std::vector<Index> secret_states;

    bool contains(Index state) const;
    /// Indicator vector 1_E over `num_states` states.
    Vec indicator(Index num_states) const;
};

/// Which secret the observer is trying to infer.
struct Objective {
    enum class Kind { LastState, InitialState };
    Kind kind = Kind::LastState;
    SecretSpec secret;

    static Objective last_state(SecretSpec secret) { return {Kind::LastState, std::move(secret)}; }
    static Objective initial_state() { return {Kind::InitialState, {}}; }
    std::string name() const { return kind == Kind::LastState ? "last_state" : "initial_state"; }
};

struct EntropyEstimate {
    enum class Mode { Exact, Sampled };
    double value = 0.0;  ///< bits
    Vec grad;
    double std_err = 0.0;
    Mode mode = Mode::Exact;
    int samples = 0;
};

/// Posterior of Z_T = 1_E(S_T) given y, as P(Z_T = 1 | y) and its gradient.
struct BinaryPosterior {
    double p1 = 0.0;
    Vec p1_grad;
    double p0() const { return 1.0 - p1; }
    Vec p0_grad() const { return -p1_grad; }
};

BinaryPosterior last_state_posterior(const ForwardTable& table, const SecretSpec& secret);

/// log P(y) and grad log P(y), as produced by the forward pass.
struct Evidence {
    double log_prob = 0.0;
    Vec log_prob_grad;
    static Evidence from(const ForwardTable& table) { return {table.log_seq_prob(), table.log_seq_prob_grad()}; }
};

struct StatePosterior {
    Vec probability;  ///< P(S_0 = s | y)
    Mat grad;         ///< row s: grad P(S_0 = s | y)
};

StatePosterior initial_state_posterior(const BackwardTable& table, const ObservationModel& obs, const Vec& mu0,
                                       const ObsSeq& y, const Evidence& evidence);

/// Per-sequence pieces of the entropy and its gradient.
struct SequenceTerm {
    double log_prob = 0.0;  ///< ln P(y)
    double entropy = 0.0;   ///< -sum_z P(z|y) log2 P(z|y)
    /// -sum_z [log2 P(z|y) grad P(z|y) + P(z|y) log2 P(z|y) grad ln P(y) + grad P(z|y) / ln 2]
    Vec grad;
};

/// How per-sequence gradients are obtained.
enum class GradientEngine {
    Messages,  ///< forward/backward tables carrying full gradients
    Adjoint    ///< one reverse sweep per sequence; same quantity, O(T N^2)
};

SequenceTerm sequence_term(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                           const Objective& objective, const ObsSeq& y,
                           GradientEngine engine = GradientEngine::Messages);

constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// H and grad H by summing over every y in O^{T+1}.
EntropyEstimate exact_entropy(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                              const Objective& objective, int horizon,
                              std::uint64_t enumeration_cap = kDefaultEnumerationCap,
                              GradientEngine engine = GradientEngine::Messages);

/// Monte Carlo estimate from `samples` observation sequences drawn under theta.
EntropyEstimate sampled_entropy(const Mdp& mdp, const ObservationModel& obs, const PolicyParams& theta,
                                const Objective& objective, int horizon, int samples, std::uint64_t seed,
                                GradientEngine engine = GradientEngine::Adjoint);

/// Same estimator over a caller-supplied set of sequences.
EntropyEstimate sampled_entropy(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                                const Objective& objective, const std::vector<ObsSeq>& sequences,
                                GradientEngine engine = GradientEngine::Adjoint);

/// Upper bound of the objective's entropy: 1 bit, or log2 |Supp(mu0)|.
double entropy_upper_bound(const Objective& objective, const Vec& mu0);

/// Throws InvariantViolation if `estimate.value` leaves [0, upper bound].
void check_entropy_bounds(const EntropyEstimate& estimate, const Objective& objective, const Vec& mu0);

/// Number of sequences in O^{T+1}, saturating at UINT64_MAX.
std::uint64_t observation_space_size(Index symbols, int horizon);

/// Calls `visit(y)` for every y in O^{T+1} in lexicographic order.
template <class Visitor>
void for_each_sequence(Index symbols, int horizon, Visitor&& visit) {
    ObsSeq y(static_cast<std::size_t>(horizon) + 1, 0);
    while (true) {
        visit(static_cast<const ObsSeq&>(y));
        std::size_t pos = y.size();
        while (pos > 0) {
            --pos;
            if (++y[pos] < symbols) break;
            y[pos] = 0;
            if (pos == 0) return;
        }
    }
}

}  // namespace opacity
