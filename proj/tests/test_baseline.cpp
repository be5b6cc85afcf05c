#include "opacity/baseline.hpp"
#include "opacity/gridworld.hpp"
#include "opacity/random_model.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace opacity;

namespace {

InducedChain chain_of(const Mat& kernel) {
    const Index n = kernel.rows();
    std::vector<Mat> rows(static_cast<std::size_t>(n), Mat::Zero(n, 1));
    return InducedChain(kernel, rows, Mat::Ones(n, 1));
}

// Discounted value of the raw reward plus tau * (per-state policy entropy, nats), by power iteration.
double regularized_value_by_iteration(const Mdp& mdp, const Mat& theta, double tau) {
    const Mat pi = oracle::direct_policy(theta);
    const Mat p = oracle::direct_kernel(mdp, theta);
    Vec r(mdp.num_states());
    for (Index s = 0; s < mdp.num_states(); ++s) {
        double h = 0.0;
        for (Index a = 0; a < mdp.num_actions(); ++a) h -= pi(s, a) * std::log(pi(s, a));
        r[s] = pi.row(s).dot(mdp.reward().row(s)) + tau * h;
    }
    Vec v = Vec::Zero(mdp.num_states());
    for (int it = 0; it < 3000; ++it) v = r + mdp.discount() * p * v;
    return mdp.initial().dot(v);
}

}  // namespace

TEST_CASE("occupancy measure: closed forms") {
    const Vec one = occupancy_measure(chain_of(Mat::Identity(3, 3)), Vec::Unit(3, 1), 0.9);
    CHECK((one - Vec::Unit(3, 1)).cwiseAbs().maxCoeff() < 1e-12);

    Mat sym(2, 2);
    sym << 0.3, 0.7, 0.7, 0.3;
    const Vec half = occupancy_measure(chain_of(sym), Vec::Constant(2, 0.5), 0.8);
    CHECK(std::abs(half[0] - 0.5) < 1e-12);
    CHECK(std::abs(half[1] - 0.5) < 1e-12);

    CHECK_THROWS_AS(occupancy_measure(chain_of(sym), Vec::Constant(2, 0.5), 1.0), std::invalid_argument);
}

TEST_CASE("occupancy measure matches the truncated series") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const RandomModel m = random_model({.states = 4, .actions = 3, .symbols = 2, .seed = seed});
        const InducedChain chain = induced_kernel(m.mdp, m.theta);
        const double gamma = 0.9;
        const Vec d = occupancy_measure(chain, m.mdp.initial(), gamma);

        Vec series = Vec::Zero(4);
        Vec dist = m.mdp.initial();
        double weight = 1.0 - gamma;
        for (int t = 0; t <= 500; ++t) {
            series += weight * dist;
            dist = chain.kernel().transpose() * dist;
            weight *= gamma;
        }
        CHECK((d - series).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(d.sum() - 1.0) < 1e-10);
        CHECK(d.minCoeff() >= 0.0);
    }
}

TEST_CASE("regularized value and gradient") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const RandomModel m = random_model({.states = 4, .actions = 3, .symbols = 2, .seed = seed});
        for (double tau : {0.0, 0.3}) {
            const RegularizedValue rv = regularized_value(m.mdp, m.theta, tau);
            CHECK(std::abs(rv.value - regularized_value_by_iteration(m.mdp, m.theta.table(), tau)) < 1e-10);
            const Vec fd = oracle::central_difference(
                [&](const Vec& x) {
                    return regularized_value(m.mdp, PolicyParams::from_flat(4, 3, x), tau).value;
                },
                m.theta.flat());
            CHECK(oracle::max_rel_error(rv.grad, fd) < 1e-6);
        }
    }
}

TEST_CASE("tau = 0 baseline does at least as well as the uniform policy") {
    const GridWorld g = build_gridworld(GridSpec::default_layout());
    const PolicyParams theta = entropy_regularized_solve(g.mdp, {.tau = 0.0, .step_size = 1.0, .iterations = 500});
    const PolicyParams uniform(g.mdp.num_states(), g.mdp.num_actions());
    const double v = finite_horizon_value(g.mdp, theta, 10).value;
    CHECK(v >= finite_horizon_value(g.mdp, uniform, 10).value - 1e-3);
    CHECK(infinite_horizon_value(g.mdp, theta).value >= infinite_horizon_value(g.mdp, uniform).value - 1e-3);
}

TEST_CASE("large tau drives the baseline toward the uniform policy") {
    const GridWorld g = build_gridworld(GridSpec::default_layout());
    const PolicyParams theta =
        entropy_regularized_solve(g.mdp, {.tau = 1e3, .step_size = 1e-5, .iterations = 200});
    CHECK(policy_entropy(g.mdp, theta) >= 0.99 * std::log2(5.0));
    CHECK(policy_entropy(g.mdp, theta) <= std::log2(5.0) + 1e-12);
}

TEST_CASE("baseline sweep") {
    const RandomModel m = random_model({.states = 3, .actions = 2, .symbols = 2, .seed = 4, .discount = 0.9});
    const Objective objective = Objective::last_state({{0}});
    const BaselineEvaluation eval{.horizon = 3, .delta = 0.5, .exact = true};
    const BaselineConfig base{.step_size = 0.5, .iterations = 200};

    CHECK_THROWS_AS(baseline_sweep(m.mdp, m.obs, objective, {}, base, eval), std::invalid_argument);

    const auto rows = baseline_sweep(m.mdp, m.obs, objective, {0.0, 0.1}, base, eval);
    REQUIRE(rows.size() == 2);
    for (const BaselineRow& row : rows) {
        const EntropyEstimate h = exact_entropy(induced_kernel(m.mdp, row.theta), m.obs, m.mdp.initial(), objective, 3);
        CHECK(std::abs(row.opacity_entropy - h.value) < 1e-10);
        CHECK(std::abs(row.value - finite_horizon_value(m.mdp, row.theta, 3).value) < 1e-12);
        CHECK(row.feasible == (row.value >= 0.5 - 1e-6));
    }
    CHECK(rows[0].tau == 0.0);
    CHECK(rows[0].policy_entropy < rows[1].policy_entropy);
}
