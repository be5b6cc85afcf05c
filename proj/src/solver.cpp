#include "opacity/solver.hpp"

#include "opacity/rng.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace opacity {

namespace {

constexpr double kFeasibilityTol = 1e-6;
constexpr double kAscentTol = 1e-9;
constexpr int kMaxHalvings = 40;

struct ValuePoint {
    double value = 0.0;
    Vec grad;
};

ValueReport exact_value(const Mdp& mdp, const PolicyParams& theta, const SolverConfig& config, const Vec& start) {
    return config.value_horizon == ValueHorizon::Finite ? finite_horizon_value(mdp, theta, config.horizon, start)
                                                        : infinite_horizon_value(mdp, theta, start);
}

ValuePoint value_point(const Problem& problem, const PolicyParams& theta, const SolverConfig& config,
                       std::uint64_t value_seed) {
    const Mdp& mdp = problem.mdp;
    if (config.value_estimator == ValueEstimator::Reinforce) {
        Rng rng(value_seed);
        SampledValue sv = reinforce_value_gradient(mdp, theta, config.horizon, config.value_episodes, rng);
        return {sv.value, std::move(sv.grad)};
    }
    if (config.value_start == ValueStart::Expected) {
        ValueReport r = exact_value(mdp, theta, config, mdp.initial());
        return {r.value, std::move(r.grad)};
    }
    // Worst case over the support: the subgradient of the minimizing start state, lowest index on ties.
    const ValueReport all = exact_value(mdp, theta, config, mdp.initial());
    Index worst = -1;
    for (Index s = 0; s < mdp.num_states(); ++s)
        if (mdp.initial()[s] > 0.0 && (worst < 0 || all.per_state[s] < all.per_state[worst])) worst = s;
    ValueReport r = exact_value(mdp, theta, config, Vec::Unit(mdp.num_states(), worst));
    return {r.value, std::move(r.grad)};
}

double lagrangian(double entropy, double value, double lambda, const SolverConfig& config) {
    return config.constrained() ? entropy + lambda * (value - config.delta) : entropy;
}

}  // namespace

void SolverConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be positive");
    if (std::isnan(delta) || delta == std::numeric_limits<double>::infinity())
        throw std::invalid_argument("delta must be a number or -inf");
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    if (samples < 1) throw std::invalid_argument("samples must be at least 1");
    if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
    if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw std::invalid_argument("lambda0 must be >= 0");
    if (!(grad_tol >= 0.0) || !(slack_tol >= 0.0)) throw std::invalid_argument("tolerances must be >= 0");
    if (window < 1) throw std::invalid_argument("window must be at least 1");
    if (value_episodes < 1) throw std::invalid_argument("value episodes must be at least 1");
    if (eval_samples < 1) throw std::invalid_argument("eval samples must be at least 1");
    if (value_estimator == ValueEstimator::Reinforce && value_start == ValueStart::WorstCase)
        throw std::invalid_argument("worst-case value start needs the exact value estimator");
    if (value_estimator == ValueEstimator::Reinforce && value_horizon == ValueHorizon::Infinite)
        throw std::invalid_argument("the sampled value estimator is finite-horizon only");
    if (backtrack && mode != EntropyMode::Exact) throw std::invalid_argument("backtracking needs exact entropy mode");
}

Evaluation evaluate(const Problem& problem, const PolicyParams& theta, const SolverConfig& config,
                    std::string_view stream, std::uint64_t index, int samples) {
    const Mdp& mdp = problem.mdp;
    Evaluation out;
    if (config.mode == EntropyMode::Exact) {
        out.entropy = exact_entropy(induced_kernel(mdp, theta), problem.obs, mdp.initial(), problem.objective,
                                    config.horizon, config.enumeration_cap, GradientEngine::Messages);
    } else {
        out.entropy = sampled_entropy(mdp, problem.obs, theta, problem.objective, config.horizon, samples,
                                      derive_seed(config.seed, stream, index), config.engine);
    }
    ValuePoint v = value_point(problem, theta, config, derive_seed(config.seed, std::string(stream) + ".value", index));
    out.value = v.value;
    out.value_grad = std::move(v.grad);
    return out;
}

Vec lagrangian_gradient(const Problem& problem, const PolicyParams& theta, double lambda, const SolverConfig& config,
                        std::uint64_t index) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    const Evaluation e = evaluate(problem, theta, config, "iteration", index, config.samples);
    return e.entropy.grad + lambda * e.value_grad;
}

double dual_step(double lambda, double kappa, double value, double delta) {
    return std::max(0.0, lambda - kappa * (value - delta));
}

TrainLog solve(const Problem& problem, const SolverConfig& config, const RecordSink& sink) {
    config.validate();
    const Mdp& mdp = problem.mdp;
    const auto started = std::chrono::steady_clock::now();

    TrainLog log;
    log.config = config;
    PolicyParams theta = config.theta0 ? *config.theta0 : PolicyParams(mdp.num_states(), mdp.num_actions());
    if (theta.num_states() != mdp.num_states() || theta.num_actions() != mdp.num_actions())
        throw std::invalid_argument("theta0 shape does not match the model");
    double lambda = config.constrained() ? config.lambda0 : 0.0;

    int calm = 0;  // consecutive iterations meeting both stopping tolerances
    for (int k = 0; k < config.iterations; ++k) {
        const auto index = static_cast<std::uint64_t>(k);
        const Evaluation e = evaluate(problem, theta, config, "iteration", index, config.samples);
        const Vec grad = e.entropy.grad + lambda * e.value_grad;

        IterationRecord rec;
        rec.iteration = k;
        rec.entropy = e.entropy.value;
        rec.entropy_stderr = e.entropy.std_err;
        rec.value = e.value;
        rec.lambda = lambda;
        rec.grad_norm = grad.norm();
        rec.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

        if (!grad.allFinite() || !std::isfinite(e.entropy.value) || !std::isfinite(e.value)) {
            log.aborted = true;
            log.abort_reason = "non-finite gradient or estimate at iteration " + std::to_string(k) +
                               (k > 0 ? "; last valid iteration " + std::to_string(k - 1) : std::string());
            break;
        }
        log.records.push_back(rec);
        if (sink) sink(rec);

        double eta = config.eta;
        PolicyParams next = theta;
        next.add_flat(grad, eta);
        if (config.backtrack) {
            const double base = lagrangian(e.entropy.value, e.value, lambda, config);
            for (int h = 0; h < kMaxHalvings; ++h) {
                const Evaluation trial = evaluate(problem, next, config, "iteration", index, config.samples);
                if (lagrangian(trial.entropy.value, trial.value, lambda, config) >= base - kAscentTol) break;
                eta /= 2.0;
                next = theta;
                next.add_flat(grad, eta);
            }
        }
        theta = std::move(next);
        if (config.constrained()) lambda = dual_step(lambda, config.kappa, e.value, config.delta);

        const double violation = config.constrained() ? std::abs(std::min(0.0, e.value - config.delta)) : 0.0;
        calm = (rec.grad_norm < config.grad_tol && violation < config.slack_tol) ? calm + 1 : 0;
        if (calm >= config.window) {
            log.converged = true;
            break;
        }
    }

    log.final_theta = theta;
    log.final_lambda = lambda;
    if (log.aborted) {
        if (!log.records.empty()) {
            log.final_entropy = log.records.back().entropy;
            log.final_entropy_stderr = log.records.back().entropy_stderr;
            log.final_value = log.records.back().value;
        }
        log.feasible = false;
        return log;
    }
    const Evaluation fin = evaluate(problem, theta, config, "final", 0, config.eval_samples);
    log.final_entropy = fin.entropy.value;
    log.final_entropy_stderr = fin.entropy.std_err;
    log.final_value = fin.value;
    log.feasible = !config.constrained() || fin.value >= config.delta - kFeasibilityTol;
    return log;
}

}  // namespace opacity
