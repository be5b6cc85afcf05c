#include "opacity/random_model.hpp"
#include "opacity/solver.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace opacity;

namespace {

Problem random_problem(std::uint64_t seed, Objective objective) {
    RandomModel m = random_model({.states = 3, .actions = 2, .symbols = 2, .seed = seed, .discount = 0.9});
    return {m.mdp, m.obs, std::move(objective)};
}

SolverConfig exact_config() {
    SolverConfig c;
    c.mode = EntropyMode::Exact;
    c.horizon = 3;
    c.iterations = 60;
    c.eta = 0.5;
    c.kappa = 0.5;
    c.delta = 0.5;
    return c;
}

}  // namespace

TEST_CASE("dual step arithmetic and projection") {
    CHECK(dual_step(1.0, 0.5, 0.4, 0.3) == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(dual_step(0.01, 0.5, 10.0, 0.3) == 0.0);
    CHECK(dual_step(0.0, 0.5, 0.1, 0.3) == doctest::Approx(0.1));
}

TEST_CASE("Lagrangian gradient") {
    const Problem p = random_problem(5, Objective::last_state({{1}}));
    const SolverConfig c = exact_config();
    const RandomModel m = random_model({.states = 3, .actions = 2, .symbols = 2, .seed = 5, .discount = 0.9});
    const PolicyParams& theta = m.theta;

    const EntropyEstimate h = exact_entropy(induced_kernel(p.mdp, theta), p.obs, p.mdp.initial(), p.objective, 3);
    CHECK((lagrangian_gradient(p, theta, 0.0, c) - h.grad).cwiseAbs().maxCoeff() == 0.0);

    const double lambda = 0.7;
    const Vec grad = lagrangian_gradient(p, theta, lambda, c);
    const Vec fd = oracle::central_difference(
        [&](const Vec& x) {
            const PolicyParams t = PolicyParams::from_flat(3, 2, x);
            const double hx = exact_entropy(induced_kernel(p.mdp, t), p.obs, p.mdp.initial(), p.objective, 3).value;
            const double vx = finite_horizon_value(p.mdp, t, 3).value;
            return hx + lambda * (vx - c.delta);
        },
        theta.flat());
    CHECK(oracle::max_rel_error(grad, fd) < 1e-5);

    CHECK_THROWS_AS(lagrangian_gradient(p, theta, -1.0, c), std::invalid_argument);
}

TEST_CASE("Lagrangian gradient reduces to lambda grad V when the entropy is flat") {
    RandomModel m = random_model({.states = 3, .actions = 2, .symbols = 1, .seed = 2});
    const Problem p{m.mdp, m.obs, Objective::initial_state()};
    const Vec grad = lagrangian_gradient(p, m.theta, 2.0, exact_config());
    const Vec expected = 2.0 * finite_horizon_value(m.mdp, m.theta, 3).grad;
    CHECK((grad - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solver keeps lambda non-negative and is deterministic") {
    for (EntropyMode mode : {EntropyMode::Exact, EntropyMode::Sampled}) {
        const Problem p = random_problem(7, Objective::last_state({{0, 2}}));
        SolverConfig c = exact_config();
        c.mode = mode;
        c.samples = 200;
        c.eval_samples = 500;
        c.seed = 99;
        c.delta = 10.0;  // unreachable: lambda grows
        const TrainLog a = solve(p, c);
        const TrainLog b = solve(p, c);
        REQUIRE(a.records.size() == static_cast<std::size_t>(c.iterations));
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t k = 0; k < a.records.size(); ++k) {
            CHECK(a.records[k].iteration == static_cast<int>(k));
            CHECK(a.records[k].lambda >= 0.0);
            CHECK(a.records[k].entropy == b.records[k].entropy);
            CHECK(a.records[k].entropy_stderr == b.records[k].entropy_stderr);
            CHECK(a.records[k].value == b.records[k].value);
            CHECK(a.records[k].lambda == b.records[k].lambda);
            CHECK(a.records[k].grad_norm == b.records[k].grad_norm);
        }
        CHECK(a.final_theta == b.final_theta);
        CHECK(a.final_entropy == b.final_entropy);
        CHECK_FALSE(a.feasible);
        CHECK(a.final_lambda > c.lambda0);
    }
}

TEST_CASE("slack constraint drives lambda to zero") {
    const Problem p = random_problem(3, Objective::last_state({{1}}));
    SolverConfig c = exact_config();
    c.delta = -5.0;
    c.kappa = 0.05;
    c.lambda0 = 1.0;
    const TrainLog log = solve(p, c);
    CHECK(log.records.front().lambda == 1.0);
    // Each dual step removes at least kappa * (V - delta) >= 0.05 * 5.
    std::size_t first_zero = 0;
    while (first_zero < log.records.size() && log.records[first_zero].lambda > 0.0) ++first_zero;
    CHECK(first_zero <= 4);
    for (std::size_t k = first_zero; k < log.records.size(); ++k) CHECK(log.records[k].lambda == 0.0);
    CHECK(log.final_lambda == 0.0);
    CHECK(log.feasible);
}

TEST_CASE("unconstrained exact ascent is monotone with backtracking") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const Problem p = random_problem(seed, seed % 2 ? Objective::last_state({{0}}) : Objective::initial_state());
        SolverConfig c = exact_config();
        c.delta = -std::numeric_limits<double>::infinity();
        c.eta = 5.0;
        c.backtrack = true;
        c.iterations = 80;
        const TrainLog log = solve(p, c);
        for (std::size_t k = 1; k < log.records.size(); ++k) {
            CHECK(log.records[k].entropy >= log.records[k - 1].entropy - 1e-9);
            CHECK(log.records[k].lambda == 0.0);
        }
        CHECK(log.records.back().entropy > log.records.front().entropy);
    }
}

TEST_CASE("stopping rule fires on a flat objective") {
    RandomModel m = random_model({.states = 3, .actions = 2, .symbols = 1, .seed = 2});
    const Problem p{m.mdp, m.obs, Objective::initial_state()};
    SolverConfig c = exact_config();
    c.delta = -100.0;
    c.iterations = 500;
    c.window = 10;
    const TrainLog log = solve(p, c);
    CHECK(log.converged);
    CHECK(log.records.size() == 11);  // lambda hits 0 after the first step, then 10 quiet iterations
}

TEST_CASE("zero iterations still report the initial policy") {
    const Problem p = random_problem(4, Objective::last_state({{2}}));
    SolverConfig c = exact_config();
    c.iterations = 0;
    const TrainLog log = solve(p, c);
    CHECK(log.records.empty());
    const PolicyParams uniform(3, 2);
    CHECK(log.final_theta == uniform);
    const double h = exact_entropy(induced_kernel(p.mdp, uniform), p.obs, p.mdp.initial(), p.objective, 3).value;
    CHECK(log.final_entropy == doctest::Approx(h).epsilon(1e-14));
    CHECK(log.final_lambda == c.lambda0);
}

TEST_CASE("solver config validation") {
    SolverConfig c;
    c.eta = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SolverConfig{};
    c.lambda0 = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SolverConfig{};
    c.samples = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SolverConfig{};
    c.backtrack = true;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = SolverConfig{};
    c.delta = -std::numeric_limits<double>::infinity();
    CHECK_NOTHROW(c.validate());
    CHECK_FALSE(c.constrained());
}
