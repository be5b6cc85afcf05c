#pragma once

#include "opacity/mdp.hpp"
#include "opacity/types.hpp"

#include <string>
#include <vector>

namespace opacity {

/// The observer's sensor: emission probabilities b_i(o), independent of the policy.
class ObservationModel {
public:
    ObservationModel(std::vector<std::string> symbols, Mat emission);

    Index num_states() const { return emission_.rows(); }
    Index num_symbols() const { return emission_.cols(); }
    const std::vector<std::string>& symbols() const { return symbols_; }
    const Mat& emission() const { return emission_; }
    double emission(Index state, Index symbol) const { return emission_(state, symbol); }
    /// Column b_.(o) as a vector over states.
    Vec likelihood(Index symbol) const;
    Index symbol_index(const std::string& symbol) const;

private:
    std::vector<std::string> symbols_;
    Mat emission_;
};

/// Observation indices o_0 .. o_T, one per visited state.
using ObsSeq = std::vector<Index>;

/**
 * Forward messages alpha_t(j) = P(o_0..o_t, S_t = j) and their gradients.
 *
 * Messages are stored normalized per time step together with the log of each
 * step's normalizer, so long horizons do not underflow. The accessors return
 * unscaled quantities.
 */
class ForwardTable {
public:
    int horizon() const { return static_cast<int>(normalized_.rows()) - 1; }
    Index num_states() const { return normalized_.cols(); }
    bool has_gradient() const { return !normalized_grad_.empty(); }

    double alpha(int t, Index j) const;
    Vec alpha_grad(int t, Index j) const;
    double seq_prob() const;
    Vec seq_prob_grad() const;

    /// True when the sequence has positive probability.
    bool has_evidence() const { return evidence_; }
    double log_seq_prob() const { return log_prob_; }
    const Vec& log_seq_prob_grad() const { return log_prob_grad_; }

    /// alpha_t / sum(alpha_t); equals P(S_t = . | o_0..o_t).
    Vec normalized(int t) const { return normalized_.row(t).transpose(); }
    const Mat& normalized_grad(int t) const { return normalized_grad_[static_cast<std::size_t>(t)]; }
    double log_scale(int t) const { return log_scale_[t]; }

private:
    friend ForwardTable forward_messages(const InducedChain&, const ObservationModel&, const Vec&, const ObsSeq&,
                                         bool);
    Mat normalized_;                    // (T+1) x N
    std::vector<Mat> normalized_grad_;  // per t: N x D
    Vec log_scale_;                     // log s_t
    Mat log_scale_grad_;                // (T+1) x D, grad log s_t
    Vec cum_log_;                       // sum_{u<=t} log s_u
    Mat cum_log_grad_;
    double log_prob_ = 0.0;
    Vec log_prob_grad_;
    bool evidence_ = true;
};

/**
 * Backward messages beta_t(i) = P(o_{t+1}..o_T | S_t = i), beta_T = 1, with
 * gradients. Stored normalized like ForwardTable.
 */
class BackwardTable {
public:
    int horizon() const { return static_cast<int>(normalized_.rows()) - 1; }
    Index num_states() const { return normalized_.cols(); }

    double beta(int t, Index i) const;
    Vec beta_grad(int t, Index i) const;

    Vec normalized(int t) const { return normalized_.row(t).transpose(); }
    const Mat& normalized_grad(int t) const { return normalized_grad_[static_cast<std::size_t>(t)]; }
    /// log of the factor that maps normalized(t) back to beta_t.
    double log_factor(int t) const { return cum_log_[t]; }
    Vec log_factor_grad(int t) const { return cum_log_grad_.row(t).transpose(); }
    bool has_evidence() const { return evidence_; }

private:
    friend BackwardTable backward_messages(const InducedChain&, const ObservationModel&, const ObsSeq&);
    Mat normalized_;
    std::vector<Mat> normalized_grad_;
    Vec cum_log_;  // sum_{u=t}^{T-1} log r_u
    Mat cum_log_grad_;
    bool evidence_ = true;
};

struct Run {
    std::vector<Index> states;
    std::vector<Index> actions;
    ObsSeq observations;
};

class Rng;

/// One trajectory of the policy-induced process: S_0 ~ mu0, A_t ~ pi, S_{t+1} ~ P, O_t ~ b_{S_t}.
Run sample_run(const Mdp& mdp, const ObservationModel& obs, const PolicyParams& theta, int horizon, Rng& rng);
/// Same, drawing from a precomputed chain (actions are not recorded).
ObsSeq sample_observations(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0, int horizon,
                           Rng& rng);

ForwardTable forward_messages(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                              const ObsSeq& y, bool with_gradient = true);

BackwardTable backward_messages(const InducedChain& chain, const ObservationModel& obs, const ObsSeq& y);

struct Likelihood {
    double value = 0.0;
    Vec grad;
};

/// P(y | S_0 = i) = b_i(o_0) beta_0(i) and its gradient.
Likelihood likelihood_given_start(const BackwardTable& table, const ObservationModel& obs, const ObsSeq& y, Index i);

/**
 * Gradient of a weighted path sum, divided by P(y):
 *
 *   F(theta) = sum over state paths s_0..s_T of u(s_0) v(s_T) P(path, y),
 *   returns (grad F) / P(y).
 *
 * Computed in one forward and one backward sweep, without per-entry gradient
 * tables. Every entropy gradient is of this form for suitable u and v.
 * Throws DegenerateEvidence when P(y) = 0.
 */
Vec path_functional_gradient(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                             const ObsSeq& y, const Vec& start_weight, const Vec& end_weight);

void check_sequence(const ObservationModel& obs, const ObsSeq& y);

}  // namespace opacity
