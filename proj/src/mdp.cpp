#include "opacity/mdp.hpp"

#include "opacity/rng.hpp"

#include <cmath>
#include <string>

namespace opacity {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_distribution(const Vec& p, const std::string& what) {
    for (Index k = 0; k < p.size(); ++k) {
        if (!std::isfinite(p[k]) || p[k] < 0.0) throw ModelError(what + ": negative or non-finite probability");
    }
    if (std::abs(p.sum() - 1.0) > kStochasticTol) throw ModelError(what + ": probabilities do not sum to 1");
}

void check_state(const PolicyParams& theta, Index state) {
    if (state < 0 || state >= theta.num_states())
        throw std::out_of_range("state index " + std::to_string(state) + " out of range");
}

}  // namespace

Mdp::Mdp(std::vector<Mat> transitions, Vec initial, Mat reward, double discount)
    : transitions_(std::move(transitions)), initial_(std::move(initial)), reward_(std::move(reward)),
      discount_(discount) {
    const Index n = initial_.size();
    if (n == 0) throw ModelError("MDP needs at least one state");
    if (transitions_.empty()) throw ModelError("MDP needs at least one action");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
        const Mat& p = transitions_[a];
        if (p.rows() != n || p.cols() != n) throw ModelError("transition matrix has wrong shape");
        for (Index i = 0; i < n; ++i)
            check_distribution(p.row(i).transpose(),
                               "transition row (state " + std::to_string(i) + ", action " + std::to_string(a) + ")");
    }
    check_distribution(initial_, "initial distribution");
    if (reward_.rows() != n || reward_.cols() != num_actions()) throw ModelError("reward table has wrong shape");
    if (!reward_.allFinite()) throw ModelError("reward table has non-finite entries");
    if (!(discount_ >= 0.0 && discount_ <= 1.0)) throw ModelError("discount must lie in [0, 1]");
}

Mdp Mdp::with_initial(Vec initial) const {
    return Mdp(transitions_, std::move(initial), reward_, discount_);
}

PolicyParams::PolicyParams(Index states, Index actions) : theta_(Mat::Zero(states, actions)) {}

PolicyParams::PolicyParams(Mat theta) : theta_(std::move(theta)) {
    if (!theta_.allFinite()) throw std::invalid_argument("policy parameters must be finite");
}

PolicyParams PolicyParams::from_flat(Index states, Index actions, const Vec& flat) {
    if (flat.size() != states * actions) throw std::invalid_argument("flat parameter vector has wrong length");
    Mat theta(states, actions);
    for (Index s = 0; s < states; ++s)
        for (Index a = 0; a < actions; ++a) theta(s, a) = flat[s * actions + a];
    return PolicyParams(std::move(theta));
}

Vec PolicyParams::flat() const {
    Vec out(dim());
    for (Index s = 0; s < num_states(); ++s)
        for (Index a = 0; a < num_actions(); ++a) out[flat_index(s, a)] = theta_(s, a);
    return out;
}

void PolicyParams::add_flat(const Vec& step, double scale) {
    if (step.size() != dim()) throw std::invalid_argument("parameter step has wrong length");
    for (Index s = 0; s < num_states(); ++s)
        for (Index a = 0; a < num_actions(); ++a) theta_(s, a) += scale * step[flat_index(s, a)];
}

Vec softmax_policy(const PolicyParams& theta, Index state) {
    check_state(theta, state);
    const auto row = theta.table().row(state);
    const double shift = row.maxCoeff();
    Vec p = (row.array() - shift).exp().transpose();
    return p / p.sum();
}

Mat policy_table(const PolicyParams& theta) {
    Mat pi(theta.num_states(), theta.num_actions());
    for (Index s = 0; s < theta.num_states(); ++s) pi.row(s) = softmax_policy(theta, s).transpose();
    return pi;
}

Vec log_policy_gradient(const PolicyParams& theta, Index state, Index action) {
    check_state(theta, state);
    if (action < 0 || action >= theta.num_actions())
        throw std::out_of_range("action index " + std::to_string(action) + " out of range");
    const Vec pi = softmax_policy(theta, state);
    Vec grad = Vec::Zero(theta.dim());
    for (Index b = 0; b < theta.num_actions(); ++b)
        grad[theta.flat_index(state, b)] = (b == action ? 1.0 : 0.0) - pi[b];
    return grad;
}

InducedChain::InducedChain(Mat kernel, std::vector<Mat> row_grads, Mat policy)
    : kernel_(std::move(kernel)), row_grads_(std::move(row_grads)), policy_(std::move(policy)) {}

Vec InducedChain::kernel_grad(Index i, Index j) const {
    Vec grad = Vec::Zero(param_dim());
    grad.segment(i * num_actions(), num_actions()) = row_grad(i).row(j).transpose();
    return grad;
}

double InducedChain::kernel_grad(Index i, Index j, Index coordinate) const {
    const Index owner = coordinate / num_actions();
    if (owner != i) return 0.0;
    return row_grad(i)(j, coordinate % num_actions());
}

Vec InducedChain::chain_rule(const Mat& kernel_sensitivity) const {
    const Index k = num_actions();
    Vec grad(param_dim());
    for (Index i = 0; i < num_states(); ++i)
        grad.segment(i * k, k) = (kernel_sensitivity.row(i) * row_grad(i)).transpose();
    return grad;
}

InducedChain induced_kernel(const Mdp& mdp, const PolicyParams& theta) {
    const Index n = mdp.num_states();
    const Index k = mdp.num_actions();
    if (theta.num_states() != n || theta.num_actions() != k)
        throw std::invalid_argument("policy parameters do not match the MDP shape");

    const Mat pi = policy_table(theta);
    Mat kernel = Mat::Zero(n, n);
    for (Index a = 0; a < k; ++a) kernel += pi.col(a).asDiagonal() * mdp.transition(a);

    // dP(i,j)/dtheta(i,b) = sum_a P(j|i,a) pi(a|i) (1{a=b} - pi(b|i))
    //                     = pi(b|i) (P(j|i,b) - P_theta(i,j))
    std::vector<Mat> row_grads(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Mat g(n, k);
        for (Index b = 0; b < k; ++b)
            g.col(b) = pi(i, b) * (mdp.transition(b).row(i) - kernel.row(i)).transpose();
        row_grads[static_cast<std::size_t>(i)] = std::move(g);
    }
    return InducedChain(std::move(kernel), std::move(row_grads), pi);
}

ValueReport finite_horizon_value(const Mdp& mdp, const PolicyParams& theta, int horizon, const Vec& start) {
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    const Index n = mdp.num_states();
    const Index k = mdp.num_actions();
    const double gamma = mdp.discount();
    const InducedChain chain = induced_kernel(mdp, theta);
    const Mat& pi = chain.policy();

    // Backward pass: advantages Q_t - V_t for every t.
    const auto steps = static_cast<std::size_t>(horizon) + 1;
    std::vector<Mat> advantage(steps);
    Vec next = Vec::Zero(n);
    for (int t = horizon; t >= 0; --t) {
        Mat q = mdp.reward();
        if (t < horizon)
            for (Index a = 0; a < k; ++a) q.col(a) += gamma * (mdp.transition(a) * next);
        const Vec v = pi.cwiseProduct(q).rowwise().sum();
        advantage[static_cast<std::size_t>(t)] = q.colwise() - v;
        next = v;
    }

    ValueReport report;
    report.per_state = next;
    report.value = start.dot(next);

    Vec occupancy = start;
    Mat grad = Mat::Zero(n, k);
    double discount = 1.0;
    for (int t = 0; t <= horizon; ++t) {
        grad += discount * (occupancy.asDiagonal() * pi.cwiseProduct(advantage[static_cast<std::size_t>(t)]));
        occupancy = chain.kernel().transpose() * occupancy;
        discount *= gamma;
    }
    report.grad = PolicyParams(grad).flat();
    return report;
}

ValueReport finite_horizon_value(const Mdp& mdp, const PolicyParams& theta, int horizon) {
    return finite_horizon_value(mdp, theta, horizon, mdp.initial());
}

Vec value_gradient(const Mdp& mdp, const PolicyParams& theta, int horizon) {
    return finite_horizon_value(mdp, theta, horizon).grad;
}

ValueReport infinite_horizon_value(const Mdp& mdp, const PolicyParams& theta, const Vec& start) {
    if (mdp.discount() >= 1.0) throw std::invalid_argument("infinite-horizon value requires discount < 1");
    const Index n = mdp.num_states();
    const Index k = mdp.num_actions();
    const double gamma = mdp.discount();
    const InducedChain chain = induced_kernel(mdp, theta);
    const Mat& pi = chain.policy();

    const Mat system = Mat::Identity(n, n) - gamma * chain.kernel();
    const Eigen::PartialPivLU<Mat> lu(system);
    const Vec reward_pi = pi.cwiseProduct(mdp.reward()).rowwise().sum();
    const Vec v = lu.solve(reward_pi);
    const Vec visits = lu.transpose().solve(start);

    Mat q = mdp.reward();
    for (Index a = 0; a < k; ++a) q.col(a) += gamma * (mdp.transition(a) * v);
    const Mat grad = visits.asDiagonal() * pi.cwiseProduct(q.colwise() - v);

    ValueReport report;
    report.value = start.dot(v);
    report.per_state = v;
    report.grad = PolicyParams(grad).flat();
    return report;
}

ValueReport infinite_horizon_value(const Mdp& mdp, const PolicyParams& theta) {
    return infinite_horizon_value(mdp, theta, mdp.initial());
}

SampledValue reinforce_value_gradient(const Mdp& mdp, const PolicyParams& theta, int horizon, int episodes,
                                      Rng& rng) {
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    if (episodes < 1) throw std::invalid_argument("REINFORCE needs at least one episode");
    const Mat pi = policy_table(theta);
    const auto steps = static_cast<std::size_t>(horizon) + 1;

    std::vector<Index> states(steps), actions(steps);
    std::vector<double> rewards(steps);
    Vec grad_sum = Vec::Zero(theta.dim());
    double return_sum = 0.0;
    double return_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Index s = rng.categorical(mdp.initial());
        double discount = 1.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const Index a = rng.categorical(pi.row(s).transpose());
            states[t] = s;
            actions[t] = a;
            rewards[t] = discount * mdp.reward()(s, a);
            discount *= mdp.discount();
            if (t + 1 < steps) s = rng.categorical(mdp.transition(a).row(s).transpose());
        }
        double to_go = 0.0;
        for (std::size_t t = steps; t-- > 0;) {
            to_go += rewards[t];
            const Index st = states[t];
            for (Index b = 0; b < theta.num_actions(); ++b)
                grad_sum[theta.flat_index(st, b)] += ((b == actions[t] ? 1.0 : 0.0) - pi(st, b)) * to_go;
        }
        return_sum += to_go;
        return_sq += to_go * to_go;
    }
    SampledValue out;
    const double m = episodes;
    out.value = return_sum / m;
    out.grad = grad_sum / m;
    if (episodes > 1) {
        const double var = std::max(0.0, (return_sq - m * out.value * out.value) / (m - 1.0));
        out.std_err = std::sqrt(var / m);
    }
    return out;
}

}  // namespace opacity
