#pragma once

#include "opacity/types.hpp"

#include <vector>

namespace opacity {

class Rng;

/**
 * Finite Markov decision process with a state-action reward.
 *
 * Transitions are kept as one dense N x N matrix per action, so
 * `transition(a)(i, j)` is the probability of reaching j after taking a in i.
 * The constructor rejects rows that are not stochastic within 1e-12.
 */
class Mdp {
public:
    Mdp(std::vector<Mat> transitions, Vec initial, Mat reward, double discount);

    Index num_states() const { return initial_.size(); }
    Index num_actions() const { return static_cast<Index>(transitions_.size()); }
    /// Dimension of the flattened softmax parameter vector (N * K).
    Index param_dim() const { return num_states() * num_actions(); }

    const Mat& transition(Index action) const { return transitions_.at(static_cast<std::size_t>(action)); }
    double transition(Index from, Index action, Index to) const { return transition(action)(from, to); }
    const Vec& initial() const { return initial_; }
    const Mat& reward() const { return reward_; }
    double discount() const { return discount_; }

    /// Same dynamics and reward with a different initial distribution.
    Mdp with_initial(Vec initial) const;

private:
    std::vector<Mat> transitions_;
    Vec initial_;
    Mat reward_;
    double discount_;
};

/// Tabular softmax policy parameters, one real per state-action pair.
/// The flat gradient layout is row-major: coordinate `s * K + a`.
class PolicyParams {
public:
    PolicyParams(Index states, Index actions);
    explicit PolicyParams(Mat theta);

    static PolicyParams from_flat(Index states, Index actions, const Vec& flat);

    Index num_states() const { return theta_.rows(); }
    Index num_actions() const { return theta_.cols(); }
    Index dim() const { return theta_.size(); }
    Index flat_index(Index state, Index action) const { return state * num_actions() + action; }

    const Mat& table() const { return theta_; }
    double operator()(Index state, Index action) const { return theta_(state, action); }
    double& operator()(Index state, Index action) { return theta_(state, action); }

    Vec flat() const;
    void add_flat(const Vec& step, double scale = 1.0);

    bool operator==(const PolicyParams& other) const { return theta_ == other.theta_; }

private:
    Mat theta_;
};

/// pi_theta(. | state), computed in max-shifted form.
Vec softmax_policy(const PolicyParams& theta, Index state);

/// Every row of pi_theta as an N x K matrix.
Mat policy_table(const PolicyParams& theta);

/// Gradient of log pi_theta(action | state) with respect to the flat parameters.
Vec log_policy_gradient(const PolicyParams& theta, Index state, Index action);

/**
 * Markov chain obtained by marginalizing actions under a softmax policy.
 *
 * The kernel gradient is stored compactly: only parameters of row i can
 * move P(i, .), so `row_grad(i)(j, a)` holds dP(i, j) / d theta(i, a).
 * `kernel_grad(i, j)` expands this to a full length-D vector.
 */
class InducedChain {
public:
    InducedChain(Mat kernel, std::vector<Mat> row_grads, Mat policy);

    Index num_states() const { return kernel_.rows(); }
    Index num_actions() const { return policy_.cols(); }
    Index param_dim() const { return num_states() * num_actions(); }

    const Mat& kernel() const { return kernel_; }
    double kernel(Index i, Index j) const { return kernel_(i, j); }
    const Mat& row_grad(Index i) const { return row_grads_[static_cast<std::size_t>(i)]; }
    Vec kernel_grad(Index i, Index j) const;
    double kernel_grad(Index i, Index j, Index coordinate) const;
    const Mat& policy() const { return policy_; }

    /// Pull back a sensitivity G(i, j) = dF / dP(i, j) to dF / d theta.
    Vec chain_rule(const Mat& kernel_sensitivity) const;

private:
    Mat kernel_;
    std::vector<Mat> row_grads_;
    Mat policy_;
};

InducedChain induced_kernel(const Mdp& mdp, const PolicyParams& theta);

struct ValueReport {
    double value = 0.0;
    Vec grad;
    /// State values at t = 0 (finite horizon) or the stationary values (infinite horizon).
    Vec per_state;
};

/// E[sum_{t=0}^{T} gamma^t R(S_t, A_t)] from `start`, with its exact gradient.
ValueReport finite_horizon_value(const Mdp& mdp, const PolicyParams& theta, int horizon, const Vec& start);
ValueReport finite_horizon_value(const Mdp& mdp, const PolicyParams& theta, int horizon);

Vec value_gradient(const Mdp& mdp, const PolicyParams& theta, int horizon);

/// Discounted infinite-horizon value and gradient; requires gamma < 1.
ValueReport infinite_horizon_value(const Mdp& mdp, const PolicyParams& theta, const Vec& start);
ValueReport infinite_horizon_value(const Mdp& mdp, const PolicyParams& theta);

struct SampledValue {
    double value = 0.0;
    double std_err = 0.0;
    Vec grad;
};

/// REINFORCE estimate of the finite-horizon value and its gradient from `episodes` rollouts.
SampledValue reinforce_value_gradient(const Mdp& mdp, const PolicyParams& theta, int horizon, int episodes,
                                      Rng& rng);

}  // namespace opacity
