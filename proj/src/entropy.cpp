#include "opacity/entropy.hpp"

#include "opacity/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace opacity {

namespace {

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;
constexpr double kBoundTol = 1e-9;

// 0 log 0 = 0
double xlog2x(double p) {
    return p > 0.0 ? p * std::log2(p) : 0.0;
}

double safe_log2(double p) {
    return p > 0.0 ? std::log2(p) : 0.0;
}

// -sum_z [log2 p_z grad p_z + p_z log2 p_z grad ln P(y) + grad p_z / ln 2]
template <class ProbRange>
Vec three_term_gradient(const ProbRange& p, const std::vector<Vec>& grad_p, const Vec& grad_log_evidence) {
    Vec out = Vec::Zero(grad_log_evidence.size());
    for (std::size_t z = 0; z < grad_p.size(); ++z) {
        const double pz = p[static_cast<Index>(z)];
        if (pz > 0.0) {
            out += std::log2(pz) * grad_p[z];
            out += xlog2x(pz) * grad_log_evidence;
        }
        out += grad_p[z] * kInvLn2;
    }
    return -out;
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

Vec pairwise_sum(const std::vector<Vec>& xs, std::size_t begin, std::size_t end) {
    if (end - begin <= 8) {
        Vec s = Vec::Zero(xs[begin].size());
        for (std::size_t i = begin; i < end; ++i) s += xs[i];
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_sum(xs, begin, mid) + pairwise_sum(xs, mid, end);
}

// P(S_0 = . | y) from a value-only backward pass.
Vec initial_posterior_values(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                             const ObsSeq& y) {
    Vec beta = Vec::Ones(chain.num_states());
    for (std::size_t t = y.size() - 1; t >= 1; --t) {
        beta = chain.kernel() * obs.likelihood(y[t]).cwiseProduct(beta);
        const double r = beta.sum();
        if (!(r > 0.0)) throw DegenerateEvidence("observation sequence has zero probability");
        beta /= r;
    }
    Vec w = mu0.cwiseProduct(obs.likelihood(y[0])).cwiseProduct(beta);
    const double total = w.sum();
    if (!(total > 0.0)) throw DegenerateEvidence("observation sequence has zero probability");
    return w / total;
}

SequenceTerm term_from_messages(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                                const Objective& objective, const ObsSeq& y) {
    const ForwardTable ft = forward_messages(chain, obs, mu0, y, true);
    if (!ft.has_evidence()) throw DegenerateEvidence("observation sequence has zero probability");

    SequenceTerm term;
    term.log_prob = ft.log_seq_prob();
    const Vec& grad_log_evidence = ft.log_seq_prob_grad();

    if (objective.kind == Objective::Kind::LastState) {
        const BinaryPosterior post = last_state_posterior(ft, objective.secret);
        const Vec p = (Vec(2) << post.p0(), post.p1).finished();
        term.entropy = -(xlog2x(p[0]) + xlog2x(p[1]));
        term.grad = three_term_gradient(p, {post.p0_grad(), post.p1_grad}, grad_log_evidence);
    } else {
        const BackwardTable bt = backward_messages(chain, obs, y);
        const StatePosterior post = initial_state_posterior(bt, obs, mu0, y, Evidence::from(ft));
        std::vector<Vec> grads;
        grads.reserve(static_cast<std::size_t>(post.probability.size()));
        term.entropy = 0.0;
        for (Index s = 0; s < post.probability.size(); ++s) {
            term.entropy -= xlog2x(post.probability[s]);
            grads.emplace_back(post.grad.row(s).transpose());
        }
        term.grad = three_term_gradient(post.probability, grads, grad_log_evidence);
    }
    return term;
}

// Same bracket, collected into weights of a single path functional:
//   sum_z k_z grad N_z / P + (sum_z p_z log2 p_z - sum_z k_z p_z) grad P / P,
// with k_z = log2 p_z + 1/ln 2 and N_z the joint P(z, y).
SequenceTerm term_from_adjoint(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                               const Objective& objective, const ObsSeq& y) {
    const ForwardTable ft = forward_messages(chain, obs, mu0, y, false);
    if (!ft.has_evidence()) throw DegenerateEvidence("observation sequence has zero probability");
    const Index n = chain.num_states();

    SequenceTerm term;
    term.log_prob = ft.log_seq_prob();

    Vec p;
    if (objective.kind == Objective::Kind::LastState) {
        const Vec last = ft.normalized(ft.horizon());
        const Vec in_secret = objective.secret.indicator(n);
        const double p1 = last.dot(in_secret);
        p = (Vec(2) << 1.0 - p1, p1).finished();
    } else {
        p = initial_posterior_values(chain, obs, mu0, y);
    }

    double neg_entropy = 0.0;
    double k_dot_p = 0.0;
    Vec k(p.size());
    for (Index z = 0; z < p.size(); ++z) {
        k[z] = safe_log2(p[z]) + kInvLn2;
        neg_entropy += xlog2x(p[z]);
        k_dot_p += k[z] * p[z];
    }
    term.entropy = -neg_entropy;
    const double evidence_coeff = neg_entropy - k_dot_p;

    Vec start = Vec::Ones(n);
    Vec end = Vec::Ones(n);
    if (objective.kind == Objective::Kind::LastState) {
        for (Index j = 0; j < n; ++j) end[j] = -(k[objective.secret.contains(j) ? 1 : 0] + evidence_coeff);
    } else {
        for (Index s = 0; s < n; ++s) start[s] = -(k[s] + evidence_coeff);
    }
    term.grad = path_functional_gradient(chain, obs, mu0, y, start, end);
    return term;
}

}  // namespace

bool SecretSpec::contains(Index state) const {
    return std::find(secret_states.begin(), secret_states.end(), state) != secret_states.end();
}

Vec SecretSpec::indicator(Index num_states) const {
    Vec v = Vec::Zero(num_states);
    for (Index s : secret_states) {
        if (s < 0 || s >= num_states) throw std::out_of_range("secret state out of range");
        v[s] = 1.0;
    }
    return v;
}

BinaryPosterior last_state_posterior(const ForwardTable& table, const SecretSpec& secret) {
    if (!table.has_evidence()) throw DegenerateEvidence("observation sequence has zero probability");
    const int last = table.horizon();
    const Vec& grad_log_evidence = table.log_seq_prob_grad();
    const Vec normalized = table.normalized(last);
    const Mat& normalized_grad = table.normalized_grad(last);
    const Vec in_secret = secret.indicator(table.num_states());

    BinaryPosterior post;
    post.p1_grad = Vec::Zero(grad_log_evidence.size());
    for (Index k = 0; k < table.num_states(); ++k) {
        if (in_secret[k] == 0.0) continue;
        // alpha_T(k) / P(y) and grad alpha_T(k) / P(y), without leaving scaled form
        const double alpha_over_p = normalized[k];
        const Vec grad_alpha_over_p = normalized_grad.row(k).transpose() + alpha_over_p * grad_log_evidence;
        post.p1 += alpha_over_p;
        post.p1_grad += grad_alpha_over_p - alpha_over_p * grad_log_evidence;
    }
    return post;
}

StatePosterior initial_state_posterior(const BackwardTable& table, const ObservationModel& obs, const Vec& mu0,
                                       const ObsSeq& y, const Evidence& evidence) {
    check_sequence(obs, y);
    if (!table.has_evidence() || !std::isfinite(evidence.log_prob))
        throw DegenerateEvidence("observation sequence has zero probability");
    const Index n = table.num_states();
    const Index d = evidence.log_prob_grad.size();
    const Vec beta0 = table.normalized(0);
    const Mat& beta0_grad = table.normalized_grad(0);
    const Vec log_factor_grad = table.log_factor_grad(0);
    // beta_0(i) / P(y) = beta0[i] * ratio
    const double ratio = std::exp(table.log_factor(0) - evidence.log_prob);

    StatePosterior post{Vec::Zero(n), Mat::Zero(n, d)};
    for (Index i = 0; i < n; ++i) {
        if (mu0[i] == 0.0) continue;
        const double b0 = obs.emission(i, y[0]);
        // mu0 P(y|i) / P(y) and mu0 grad P(y|i) / P(y)
        const double weight = mu0[i] * b0 * ratio;
        const double posterior = weight * beta0[i];
        const Vec likelihood_grad_term = weight * (beta0_grad.row(i).transpose() + beta0[i] * log_factor_grad);
        post.probability[i] = posterior;
        post.grad.row(i) = (likelihood_grad_term - posterior * evidence.log_prob_grad).transpose();
    }
    return post;
}

SequenceTerm sequence_term(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                           const Objective& objective, const ObsSeq& y, GradientEngine engine) {
    check_sequence(obs, y);
    return engine == GradientEngine::Messages ? term_from_messages(chain, obs, mu0, objective, y)
                                              : term_from_adjoint(chain, obs, mu0, objective, y);
}

std::uint64_t observation_space_size(Index symbols, int horizon) {
    std::uint64_t total = 1;
    const auto base = static_cast<std::uint64_t>(symbols);
    for (int t = 0; t <= horizon; ++t) {
        if (base != 0 && total > std::numeric_limits<std::uint64_t>::max() / base)
            return std::numeric_limits<std::uint64_t>::max();
        total *= base;
    }
    return total;
}

EntropyEstimate exact_entropy(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                              const Objective& objective, int horizon, std::uint64_t enumeration_cap,
                              GradientEngine engine) {
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    const std::uint64_t count = observation_space_size(obs.num_symbols(), horizon);
    if (count > enumeration_cap)
        throw EnumerationCapExceeded("observation space has " + std::to_string(count) +
                                     " sequences, above the cap of " + std::to_string(enumeration_cap));

    EntropyEstimate est;
    est.mode = EntropyEstimate::Mode::Exact;
    est.grad = Vec::Zero(chain.param_dim());
    for_each_sequence(obs.num_symbols(), horizon, [&](const ObsSeq& y) {
        const ForwardTable probe = forward_messages(chain, obs, mu0, y, false);
        if (!probe.has_evidence()) return;
        const SequenceTerm term = sequence_term(chain, obs, mu0, objective, y, engine);
        const double prob = std::exp(term.log_prob);
        est.value += prob * term.entropy;
        est.grad += prob * term.grad;
    });
    check_entropy_bounds(est, objective, mu0);
    return est;
}

EntropyEstimate sampled_entropy(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                                const Objective& objective, const std::vector<ObsSeq>& sequences,
                                GradientEngine engine) {
    if (sequences.empty()) throw std::invalid_argument("sampled entropy needs at least one sequence");
    const std::size_t m = sequences.size();
    std::vector<double> values(m);
    std::vector<Vec> grads(m);
    for (std::size_t k = 0; k < m; ++k) {
        SequenceTerm term = sequence_term(chain, obs, mu0, objective, sequences[k], engine);
        values[k] = term.entropy;
        grads[k] = std::move(term.grad);
    }

    EntropyEstimate est;
    est.mode = EntropyEstimate::Mode::Sampled;
    est.samples = static_cast<int>(m);
    const double md = static_cast<double>(m);
    est.value = pairwise_sum(values.data(), m) / md;
    est.grad = pairwise_sum(grads, 0, m) / md;
    if (m > 1) {
        std::vector<double> sq(m);
        for (std::size_t k = 0; k < m; ++k) sq[k] = (values[k] - est.value) * (values[k] - est.value);
        est.std_err = std::sqrt(pairwise_sum(sq.data(), m) / (md - 1.0) / md);
    }
    check_entropy_bounds(est, objective, mu0);
    return est;
}

EntropyEstimate sampled_entropy(const Mdp& mdp, const ObservationModel& obs, const PolicyParams& theta,
                                const Objective& objective, int horizon, int samples, std::uint64_t seed,
                                GradientEngine engine) {
    if (samples < 1) throw std::invalid_argument("sampled entropy needs M >= 1");
    const InducedChain chain = induced_kernel(mdp, theta);
    Rng rng(seed);
    std::vector<ObsSeq> sequences;
    sequences.reserve(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k) sequences.push_back(sample_observations(chain, obs, mdp.initial(), horizon, rng));
    return sampled_entropy(chain, obs, mdp.initial(), objective, sequences, engine);
}

double entropy_upper_bound(const Objective& objective, const Vec& mu0) {
    if (objective.kind == Objective::Kind::LastState) return 1.0;
    const auto support = (mu0.array() > 0.0).count();
    return support > 0 ? std::log2(static_cast<double>(support)) : 0.0;
}

void check_entropy_bounds(const EntropyEstimate& estimate, const Objective& objective, const Vec& mu0) {
    const double upper = entropy_upper_bound(objective, mu0);
    if (!(estimate.value >= -kBoundTol && estimate.value <= upper + kBoundTol))
        throw InvariantViolation(objective.name() + " entropy " + std::to_string(estimate.value) +
                                 " outside [0, " + std::to_string(upper) + "]");
}

}  // namespace opacity
