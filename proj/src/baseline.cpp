#include "opacity/baseline.hpp"

#include "opacity/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace opacity {

namespace {

// ln pi(. | s) for every row, without forming pi first.
Mat log_policy_table(const PolicyParams& theta) {
    Mat out = theta.table();
    for (Index s = 0; s < out.rows(); ++s) {
        const double m = out.row(s).maxCoeff();
        const double lse = m + std::log((out.row(s).array() - m).exp().sum());
        out.row(s).array() -= lse;
    }
    return out;
}

}  // namespace

Vec occupancy_measure(const InducedChain& chain, const Vec& mu0, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("occupancy measure requires 0 <= gamma < 1");
    if (mu0.size() != chain.num_states()) throw std::invalid_argument("initial distribution has the wrong size");
    const Index n = chain.num_states();
    const Mat system = Mat::Identity(n, n) - gamma * chain.kernel().transpose();
    return system.partialPivLu().solve((1.0 - gamma) * mu0);
}

void BaselineConfig::validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("baseline tau must be a finite value >= 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("baseline step size must be positive");
    if (iterations < 0) throw std::invalid_argument("baseline iterations must be non-negative");
}

RegularizedValue regularized_value(const Mdp& mdp, const PolicyParams& theta, double tau) {
    if (mdp.discount() >= 1.0) throw std::invalid_argument("regularized value requires discount < 1");
    const Index n = mdp.num_states();
    const double gamma = mdp.discount();
    const InducedChain chain = induced_kernel(mdp, theta);
    const Mat& pi = chain.policy();

    const Mat shaped = mdp.reward() - tau * log_policy_table(theta);
    const Eigen::PartialPivLU<Mat> lu(Mat::Identity(n, n) - gamma * chain.kernel());
    const Vec v = lu.solve(pi.cwiseProduct(shaped).rowwise().sum());
    const Vec visits = lu.transpose().solve(mdp.initial());

    Mat q = shaped;
    for (Index a = 0; a < mdp.num_actions(); ++a) q.col(a) += gamma * (mdp.transition(a) * v);
    // The tau * grad ln pi part integrates to zero under pi, leaving the usual advantage form.
    const Mat grad = visits.asDiagonal() * pi.cwiseProduct(q.colwise() - v);
    return {mdp.initial().dot(v), PolicyParams(grad).flat()};
}

PolicyParams entropy_regularized_solve(const Mdp& mdp, const BaselineConfig& config) {
    config.validate();
    PolicyParams theta(mdp.num_states(), mdp.num_actions());
    for (int k = 0; k < config.iterations; ++k) {
        const RegularizedValue rv = regularized_value(mdp, theta, config.tau);
        if (!rv.grad.allFinite()) throw std::runtime_error("non-finite baseline gradient");
        theta.add_flat(rv.grad, config.step_size);
    }
    return theta;
}

double policy_entropy(const Mdp& mdp, const PolicyParams& theta) {
    const InducedChain chain = induced_kernel(mdp, theta);
    const Vec d = occupancy_measure(chain, mdp.initial(), mdp.discount());
    const Mat& pi = chain.policy();
    const Mat logp = log_policy_table(theta);
    double h = 0.0;
    for (Index s = 0; s < pi.rows(); ++s) h -= d[s] * pi.row(s).dot(logp.row(s));
    return h / std::numbers::ln2;
}

std::vector<BaselineRow> baseline_sweep(const Mdp& mdp, const ObservationModel& obs, const Objective& objective,
                                        const std::vector<double>& taus, const BaselineConfig& base,
                                        const BaselineEvaluation& eval) {
    if (taus.empty()) throw std::invalid_argument("baseline sweep needs at least one tau");
    std::vector<BaselineRow> rows;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double tau = taus[i];
        BaselineConfig config = base;
        config.tau = tau;
        BaselineRow row;
        row.tau = tau;
        row.theta = entropy_regularized_solve(mdp, config);
        row.policy_entropy = policy_entropy(mdp, row.theta);
        const EntropyEstimate h =
            eval.exact ? exact_entropy(induced_kernel(mdp, row.theta), obs, mdp.initial(), objective, eval.horizon,
                                       eval.enumeration_cap)
                       : sampled_entropy(mdp, obs, row.theta, objective, eval.horizon, eval.samples,
                                         derive_seed(config.seed, "baseline", i));
        row.opacity_entropy = h.value;
        row.opacity_stderr = h.std_err;
        row.value = finite_horizon_value(mdp, row.theta, eval.horizon).value;
        row.feasible = row.value >= eval.delta - 1e-6;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace opacity
