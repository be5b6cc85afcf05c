#include "opacity/commands.hpp"

#include "opacity/baseline.hpp"
#include "opacity/rng.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <cmath>
#include <fstream>

namespace opacity {

namespace {

using json = nlohmann::json;

constexpr double kGradTolerance = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr double kFdFloor = 1e-3;
constexpr int kOracleSeeds = 20;
constexpr int kOracleSamples = 20000;
constexpr int kOracleMinAgreeing = 19;

std::filesystem::path output_path(const ExperimentConfig& config, const std::string& suffix) {
    std::filesystem::path p = config.output_prefix + suffix;
    if (p.is_relative()) p = std::filesystem::current_path() / p;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

double max_rel_error(const Vec& a, const Vec& b) {
    double worst = 0.0;
    for (Index k = 0; k < a.size(); ++k) {
        const double scale = std::max({std::abs(a[k]), std::abs(b[k]), kFdFloor});
        worst = std::max(worst, std::abs(a[k] - b[k]) / scale);
    }
    return worst;
}

// theta0 when configured, otherwise a seeded draw from [-1, 1] so checks avoid the symmetric uniform point.
PolicyParams check_point(const ExperimentConfig& config, const Problem& problem, std::string_view label) {
    if (config.solver.theta0) return *config.solver.theta0;
    Rng rng(derive_seed(config.solver.seed, label));
    PolicyParams theta(problem.mdp.num_states(), problem.mdp.num_actions());
    for (Index s = 0; s < theta.num_states(); ++s)
        for (Index a = 0; a < theta.num_actions(); ++a) theta(s, a) = 2.0 * rng.uniform() - 1.0;
    return theta;
}

SolverConfig exact_variant(SolverConfig c) {
    c.mode = EntropyMode::Exact;
    c.value_estimator = ValueEstimator::Exact;
    c.backtrack = false;
    return c;
}

std::string csv_number(double x) { return fmt::format("{}", x); }

class CsvLog {
public:
    CsvLog(const std::filesystem::path& path, bool timing) : file_(path, std::ios::binary | std::ios::trunc), timing_(timing) {
        if (!file_) throw std::runtime_error("cannot write " + path.string());
        file_ << "iteration,entropy,entropy_stderr,value,lambda,grad_norm,elapsed_ms\n";
        file_.flush();
    }

    void write(const IterationRecord& r) {
        file_ << r.iteration << ',' << csv_number(r.entropy) << ',' << csv_number(r.entropy_stderr) << ','
              << csv_number(r.value) << ',' << csv_number(r.lambda) << ',' << csv_number(r.grad_norm) << ','
              << (timing_ ? csv_number(std::round(r.elapsed_ms * 1000.0) / 1000.0) : std::string("0")) << '\n';
        file_.flush();
    }

private:
    std::ofstream file_;
    bool timing_;
};

int solve_exit_code(const TrainLog& log) {
    if (log.aborted) return kExitNumerical;
    if (!log.feasible) return kExitInfeasible;
    if (!log.converged) return kExitNotConverged;
    return kExitOk;
}

json summary_json(const ExperimentConfig& config, const Problem& problem, const TrainLog& log) {
    json s = {
        {"objective", problem.objective.name()},
        {"mode", config.solver.mode == EntropyMode::Exact ? "exact" : "sampled"},
        {"entropy", log.final_entropy},
        {"entropy_stderr", log.final_entropy_stderr},
        {"entropy_upper_bound", entropy_upper_bound(problem.objective, problem.mdp.initial())},
        {"value", log.final_value},
        {"lambda", log.final_lambda},
        {"feasible", log.feasible},
        {"converged", log.converged},
        {"aborted", log.aborted},
        {"iterations", log.records.size()},
        {"seed", config.solver.seed},
        {"config_hash", config_hash(config)},
        {"exit_code", solve_exit_code(log)},
    };
    if (config.solver.constrained())
        s["delta"] = config.solver.delta;
    else
        s["delta"] = "-inf";
    if (log.aborted) s["abort_reason"] = log.abort_reason;
    return s;
}

TrainLog run_solver(const ExperimentConfig& config, const Problem& problem, const CommandOptions& options,
                    std::ostream& err, CsvLog* csv) {
    const int every = std::max(1, config.solver.iterations / 20);
    return solve(problem, config.solver, [&](const IterationRecord& r) {
        if (csv) csv->write(r);
        if (!options.quiet && (r.iteration % every == 0 || r.iteration + 1 == config.solver.iterations))
            fmt::print(err, "iter {:>6}  H {:.4f} (se {:.4f})  V {:.4f}  lambda {:.4f}  |grad| {:.3e}\n", r.iteration,
                       r.entropy, r.entropy_stderr, r.value, r.lambda, r.grad_norm);
    });
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& options) {
    if (options.config.empty()) throw ParseError("--config", "a config file is required");
    ExperimentConfig config = load_config(options.config);
    if (options.seed) {
        config.solver.seed = *options.seed;
        if (config.baseline) config.baseline->base.seed = *options.seed;
    }
    if (options.out) config.output_prefix = *options.out;
    if (options.mode) {
        config.solver.mode = *options.mode;
        if (config.solver.mode != EntropyMode::Exact) config.solver.backtrack = false;
    }
    return config;
}

int run_solve(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    const ExperimentConfig config = resolve_config(options);
    const Problem problem = build_problem(config);
    const auto log_path = output_path(config, "_log.csv");
    CsvLog csv(log_path, options.timing);
    const TrainLog log = run_solver(config, problem, options, err, &csv);

    write_text(output_path(config, "_theta.json"),
               json{{"states", problem.mdp.num_states()},
                    {"actions", problem.mdp.num_actions()},
                    {"theta", matrix_json(log.final_theta.table())},
                    {"policy", matrix_json(policy_table(log.final_theta))}}
                       .dump(2) +
                   "\n");
    const json summary = summary_json(config, problem, log);
    write_text(output_path(config, "_summary.json"), summary.dump(2) + "\n");
    out << summary.dump(2) << "\n";
    if (log.aborted) fmt::print(err, "aborted: {}\n", log.abort_reason);
    return solve_exit_code(log);
}

int run_grad_check(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    const ExperimentConfig config = resolve_config(options);
    const Problem problem = build_problem(config);
    const SolverConfig exact = exact_variant(config.solver);
    const PolicyParams theta = check_point(config, problem, "grad_check");
    const double lambda = exact.constrained() ? exact.lambda0 : 0.0;
    const double delta = exact.constrained() ? exact.delta : 0.0;

    const Evaluation at = evaluate(problem, theta, exact, "grad_check", 0, 1);
    Vec grad_h = at.entropy.grad;
    if (options.corrupt_gradient && grad_h.size() > 0) grad_h[0] += 1e-3;
    const Vec grad_v = at.value_grad;
    const Vec grad_l = grad_h + lambda * grad_v;

    const Index d = theta.dim();
    Vec fd_h(d), fd_v(d);
    const Vec x = theta.flat();
    for (Index k = 0; k < d; ++k) {
        Vec plus = x, minus = x;
        plus[k] += kFdStep;
        minus[k] -= kFdStep;
        const Evaluation ep =
            evaluate(problem, PolicyParams::from_flat(theta.num_states(), theta.num_actions(), plus), exact, "grad_check", 0, 1);
        const Evaluation em =
            evaluate(problem, PolicyParams::from_flat(theta.num_states(), theta.num_actions(), minus), exact, "grad_check", 0, 1);
        fd_h[k] = (ep.entropy.value - em.entropy.value) / (2.0 * kFdStep);
        fd_v[k] = (ep.value - em.value) / (2.0 * kFdStep);
    }
    const Vec fd_l = fd_h + lambda * fd_v;

    // The reverse-sweep engine computes the same gradient by a different route.
    const EntropyEstimate adjoint = exact_entropy(induced_kernel(problem.mdp, theta), problem.obs, problem.mdp.initial(),
                                                  problem.objective, exact.horizon, exact.enumeration_cap,
                                                  GradientEngine::Adjoint);

    json checks = json::array();
    bool passed = true;
    const auto add = [&](const std::string& name, double error) {
        const bool ok = error <= kGradTolerance;
        passed = passed && ok;
        checks.push_back({{"name", name}, {"max_rel_error", error}, {"passed", ok}});
    };
    add("entropy_gradient", max_rel_error(grad_h, fd_h));
    add("value_gradient", max_rel_error(grad_v, fd_v));
    add("lagrangian_gradient", max_rel_error(grad_l, fd_l));
    add("adjoint_engine", max_rel_error(grad_h, adjoint.grad));

    const json report = {{"objective", problem.objective.name()},
                         {"parameters", d},
                         {"lambda", lambda},
                         {"delta", delta},
                         {"step", kFdStep},
                         {"tolerance", kGradTolerance},
                         {"entropy", at.entropy.value},
                         {"value", at.value},
                         {"checks", std::move(checks)},
                         {"passed", passed}};
    write_text(output_path(config, "_gradcheck.json"), report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    if (!passed) fmt::print(err, "gradient check failed\n");
    return passed ? kExitOk : kExitNumerical;
}

int run_oracle_check(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    const ExperimentConfig config = resolve_config(options);
    const Problem problem = build_problem(config);
    const int horizon = config.solver.horizon;
    const std::uint64_t space = observation_space_size(problem.obs.num_symbols(), horizon);
    if (space > config.solver.enumeration_cap)
        throw EnumerationCapExceeded("oracle check needs " + std::to_string(space) + " sequences, cap is " +
                                     std::to_string(config.solver.enumeration_cap));
    const PolicyParams theta = check_point(config, problem, "oracle_check");
    const InducedChain chain = induced_kernel(problem.mdp, theta);
    const Vec& mu0 = problem.mdp.initial();

    double total = 0.0;
    double worst_fb = 0.0;
    double worst_ends = 0.0;
    double worst_posterior = 0.0;
    for_each_sequence(problem.obs.num_symbols(), horizon, [&](const ObsSeq& y) {
        const ForwardTable ft = forward_messages(chain, problem.obs, mu0, y);
        if (!ft.has_evidence()) return;
        const double py = ft.seq_prob();
        total += py;
        const BackwardTable bt = backward_messages(chain, problem.obs, y);
        for (int t = 0; t <= horizon; ++t) {
            double c = 0.0;
            for (Index i = 0; i < chain.num_states(); ++i) c += ft.alpha(t, i) * bt.beta(t, i);
            worst_fb = std::max(worst_fb, std::abs(c - py) / py);
        }
        double start = 0.0;
        for (Index i = 0; i < chain.num_states(); ++i)
            start += mu0[i] * problem.obs.emission(i, y[0]) * bt.beta(0, i);
        worst_ends = std::max(worst_ends, std::abs(start - py) / py);
        const StatePosterior post = initial_state_posterior(bt, problem.obs, mu0, y, Evidence::from(ft));
        worst_posterior = std::max(worst_posterior, std::abs(post.probability.sum() - 1.0));
        if (problem.objective.kind == Objective::Kind::LastState) {
            const BinaryPosterior b = last_state_posterior(ft, problem.objective.secret);
            if (!(b.p1 >= -1e-12 && b.p1 <= 1.0 + 1e-12)) worst_posterior = std::max(worst_posterior, 1.0);
        }
    });

    const EntropyEstimate exact =
        exact_entropy(chain, problem.obs, mu0, problem.objective, horizon, config.solver.enumeration_cap);
    int agreeing = 0;
    double worst_z = 0.0;
    for (int k = 0; k < kOracleSeeds; ++k) {
        const EntropyEstimate s = sampled_entropy(problem.mdp, problem.obs, theta, problem.objective, horizon,
                                                  kOracleSamples, derive_seed(config.solver.seed, "oracle_check", k));
        const double z = s.std_err > 0.0 ? std::abs(s.value - exact.value) / s.std_err
                                         : (std::abs(s.value - exact.value) < 1e-12 ? 0.0 : INFINITY);
        worst_z = std::max(worst_z, z);
        agreeing += z <= 3.0 ? 1 : 0;
    }

    json checks = json::array();
    bool passed = true;
    const auto add = [&](const std::string& name, double measured, double tolerance, bool ok) {
        passed = passed && ok;
        checks.push_back({{"name", name}, {"measured", measured}, {"tolerance", tolerance}, {"passed", ok}});
    };
    add("evidence_normalization", std::abs(total - 1.0), 1e-10, std::abs(total - 1.0) <= 1e-10);
    add("forward_backward_constant", worst_fb, 1e-10, worst_fb <= 1e-10);
    add("start_end_agreement", worst_ends, 1e-12, worst_ends <= 1e-12);
    add("posterior_normalization", worst_posterior, 1e-12, worst_posterior <= 1e-12);
    checks.push_back({{"name", "sampled_vs_exact_entropy"},
                      {"exact", exact.value},
                      {"samples", kOracleSamples},
                      {"seeds", kOracleSeeds},
                      {"within_3_stderr", agreeing},
                      {"max_z", worst_z},
                      {"passed", agreeing >= kOracleMinAgreeing}});
    passed = passed && agreeing >= kOracleMinAgreeing;

    const json report = {{"objective", problem.objective.name()},
                         {"sequences", space},
                         {"checks", std::move(checks)},
                         {"passed", passed}};
    write_text(output_path(config, "_oraclecheck.json"), report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    if (!passed) fmt::print(err, "oracle check failed\n");
    return passed ? kExitOk : kExitNumerical;
}

int run_baseline_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    const ExperimentConfig config = resolve_config(options);
    if (!config.baseline) throw ParseError("/baseline", "baseline-sweep needs a baseline section");
    const Problem problem = build_problem(config);
    const SolverConfig& sc = config.solver;

    BaselineEvaluation eval;
    eval.horizon = sc.horizon;
    eval.delta = sc.constrained() ? sc.delta : -INFINITY;
    eval.exact = sc.mode == EntropyMode::Exact;
    eval.samples = sc.eval_samples;
    eval.enumeration_cap = sc.enumeration_cap;
    const std::vector<BaselineRow> rows =
        baseline_sweep(problem.mdp, problem.obs, problem.objective, config.baseline->taus, config.baseline->base, eval);
    const TrainLog log = run_solver(config, problem, options, err, nullptr);

    const auto path = output_path(config, "_baseline.csv");
    std::ofstream csv(path, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + path.string());
    csv << "method,tau,policy_entropy,opacity_entropy,opacity_stderr,value,feasible\n";
    for (const BaselineRow& r : rows) {
        csv << "entropy_regularized," << csv_number(r.tau) << ',' << csv_number(r.policy_entropy) << ','
            << csv_number(r.opacity_entropy) << ',' << csv_number(r.opacity_stderr) << ',' << csv_number(r.value)
            << ',' << (r.feasible ? 1 : 0) << '\n';
        csv.flush();
    }
    csv << "primal_dual,," << csv_number(policy_entropy(problem.mdp, log.final_theta)) << ','
        << csv_number(log.final_entropy) << ',' << csv_number(log.final_entropy_stderr) << ','
        << csv_number(log.final_value) << ',' << (log.feasible ? 1 : 0) << '\n';
    csv.flush();

    bool dominated = true;  // no feasible baseline reaches the primal-dual entropy
    bool some_violation = false;
    for (const BaselineRow& r : rows) {
        if (r.feasible && r.opacity_entropy >= log.final_entropy) dominated = false;
        if (!r.feasible) some_violation = true;
    }
    fmt::print(out, "{:>8}  {:>10}  {:>10}  {:>8}  {}\n", "tau", "H(policy)", "opacity", "value", "feasible");
    for (const BaselineRow& r : rows)
        fmt::print(out, "{:>8.3f}  {:>10.4f}  {:>10.4f}  {:>8.4f}  {}\n", r.tau, r.policy_entropy, r.opacity_entropy,
                   r.value, r.feasible ? "yes" : "no");
    fmt::print(out, "{:>8}  {:>10}  {:>10.4f}  {:>8.4f}  {}\n", "primal-dual", "", log.final_entropy, log.final_value,
               log.feasible ? "yes" : "no");
    fmt::print(out, "primal-dual dominates every feasible baseline: {}\n", dominated ? "yes" : "no");
    fmt::print(out, "some tau violates the value constraint: {}\n", some_violation ? "yes" : "no");
    return log.aborted ? kExitNumerical : kExitOk;
}

int run_build_grid(const CommandOptions& options, std::ostream& out, std::ostream&) {
    const ExperimentConfig config = resolve_config(options);
    const Problem problem = build_problem(config);
    if (config.model.kind == ModelSource::Kind::Grid) out << render_layout(config.model.grid);
    const auto path = output_path(config, "_model.json");
    write_text(path, write_model_document(problem.mdp, problem.obs));
    fmt::print(out, "{} states, {} actions, {} symbols -> {}\n", problem.mdp.num_states(), problem.mdp.num_actions(),
               problem.obs.num_symbols(), path.string());
    return kExitOk;
}

int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err) {
    try {
        if (name == "solve") return run_solve(options, out, err);
        if (name == "grad-check") return run_grad_check(options, out, err);
        if (name == "oracle-check") return run_oracle_check(options, out, err);
        if (name == "baseline-sweep") return run_baseline_sweep(options, out, err);
        if (name == "build-grid") return run_build_grid(options, out, err);
        fmt::print(err, "unknown command '{}'\n", name);
        return kExitUsage;
    } catch (const ParseError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return kExitUsage;
    } catch (const ModelError& e) {
        fmt::print(err, "model error: {}\n", e.what());
        return kExitUsage;
    } catch (const EnumerationCapExceeded& e) {
        fmt::print(err, "enumeration cap exceeded: {}\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        fmt::print(err, "invalid argument: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kExitNumerical;
    }
}

}  // namespace opacity
