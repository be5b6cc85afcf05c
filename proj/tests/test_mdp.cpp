#include "opacity/mdp.hpp"
#include "opacity/random_model.hpp"
#include "opacity/rng.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace opacity;

namespace {

Mdp single_state_mdp(double reward, double gamma, Index actions = 1) {
    std::vector<Mat> p(static_cast<std::size_t>(actions), Mat::Ones(1, 1));
    return Mdp(p, Vec::Ones(1), Mat::Constant(1, actions, reward), gamma);
}

}  // namespace

TEST_CASE("softmax of a zero row is uniform") {
    const PolicyParams theta(3, 5);
    const Vec pi = softmax_policy(theta, 1);
    for (Index a = 0; a < 5; ++a) CHECK(pi[a] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("softmax closed form for (ln 2, 0)") {
    PolicyParams theta(1, 2);
    theta(0, 0) = std::numbers::ln2;
    const Vec pi = softmax_policy(theta, 0);
    CHECK(std::abs(pi[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(pi[1] - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("softmax matches long-double evaluation and survives huge logits") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        Mat t(1, 4);
        for (Index a = 0; a < 4; ++a) t(0, a) = -5.0 + 10.0 * rng.uniform();
        const Vec pi = softmax_policy(PolicyParams(t), 0);
        const Mat ref = oracle::direct_policy(t);
        for (Index a = 0; a < 4; ++a) CHECK(std::abs(pi[a] - ref(0, a)) < 1e-12);
        CHECK(std::abs(pi.sum() - 1.0) < 1e-12);
    }
    Mat big(1, 3);
    big << 1000.0, 999.0, -1000.0;
    const Vec pi = softmax_policy(PolicyParams(big), 0);
    CHECK(pi.allFinite());
    CHECK(pi[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("softmax is invariant to a constant row shift") {
    Rng rng(3);
    Mat t(2, 3);
    for (Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform() * 4 - 2;
    Mat shifted = t;
    shifted.row(1).array() += 7.25;
    const Vec a = softmax_policy(PolicyParams(t), 1);
    const Vec b = softmax_policy(PolicyParams(shifted), 1);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax rejects out-of-range states") {
    const PolicyParams theta(2, 2);
    CHECK_THROWS_AS(softmax_policy(theta, 2), std::out_of_range);
    CHECK_THROWS_AS(softmax_policy(theta, -1), std::out_of_range);
    CHECK_THROWS_AS(log_policy_gradient(theta, 0, 5), std::out_of_range);
}

TEST_CASE("log-policy gradient") {
    SUBCASE("uniform two-action row") {
        const PolicyParams theta(3, 2);
        const Vec g = log_policy_gradient(theta, 1, 0);
        CHECK(g[2] == doctest::Approx(0.5));
        CHECK(g[3] == doctest::Approx(-0.5));
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
        CHECK(g[4] == 0.0);
        CHECK(g[5] == 0.0);
    }
    SUBCASE("row sums to zero and matches finite differences") {
        const RandomModel m = random_model({.states = 3, .actions = 3, .seed = 5, .theta_scale = 2.0});
        for (Index s = 0; s < 3; ++s)
            for (Index a = 0; a < 3; ++a) {
                const Vec g = log_policy_gradient(m.theta, s, a);
                CHECK(std::abs(g.segment(s * 3, 3).sum()) < 1e-15);
                const Vec fd = oracle::central_difference(
                    [&](const Vec& x) { return std::log(softmax_policy(PolicyParams::from_flat(3, 3, x), s)[a]); },
                    m.theta.flat());
                CHECK(oracle::max_rel_error(g, fd) < 1e-6);
            }
    }
}

TEST_CASE("model constructor enforces stochasticity") {
    Mat p = Mat::Identity(2, 2);
    p(0, 0) = 0.9;
    CHECK_THROWS_AS(Mdp({p}, Vec::Constant(2, 0.5), Mat::Zero(2, 1), 0.9), ModelError);
    CHECK_THROWS_AS(Mdp({Mat::Identity(2, 2)}, Vec::Constant(2, 0.4), Mat::Zero(2, 1), 0.9), ModelError);
    CHECK_THROWS_AS(Mdp({Mat::Identity(2, 2)}, Vec::Constant(2, 0.5), Mat::Zero(2, 1), 1.5), ModelError);
    CHECK_THROWS_AS(Mdp({Mat::Identity(2, 2)}, Vec::Constant(2, 0.5), Mat::Zero(2, 2), 0.9), ModelError);
}

TEST_CASE("induced kernel: near-deterministic policy on deterministic dynamics") {
    // action a moves i -> (i + a + 1) mod 3
    std::vector<Mat> p(2, Mat::Zero(3, 3));
    for (Index i = 0; i < 3; ++i) {
        p[0](i, (i + 1) % 3) = 1.0;
        p[1](i, (i + 2) % 3) = 1.0;
    }
    const Mdp mdp(p, Vec::Constant(3, 1.0 / 3), Mat::Zero(3, 2), 0.9);
    Mat t = Mat::Zero(3, 2);
    t.col(0).setConstant(30.0);
    const InducedChain chain = induced_kernel(mdp, PolicyParams(t));
    for (Index i = 0; i < 3; ++i) {
        CHECK(std::abs(chain.kernel(i, (i + 1) % 3) - 1.0) < 1e-9);
        CHECK(chain.kernel(i, (i + 2) % 3) < 1e-9);
    }
}

TEST_CASE("induced kernel properties on random models") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const RandomModel m = random_model({.states = 4, .actions = 3, .seed = seed, .theta_scale = 3.0});
        const InducedChain chain = induced_kernel(m.mdp, m.theta);
        const Mat direct = oracle::direct_kernel(m.mdp, m.theta.table());
        CHECK((chain.kernel() - direct).cwiseAbs().maxCoeff() < 1e-13);
        for (Index i = 0; i < 4; ++i) {
            CHECK(std::abs(chain.kernel().row(i).sum() - 1.0) < 1e-12);
            Vec row_total = Vec::Zero(chain.param_dim());
            for (Index j = 0; j < 4; ++j) {
                const Vec g = chain.kernel_grad(i, j);
                row_total += g;
                // locality: only row i of theta moves P(i, .)
                for (Index d = 0; d < g.size(); ++d)
                    if (d / 3 != i) CHECK(g[d] == 0.0);
                CHECK(chain.kernel_grad(i, j, i * 3 + 1) == g[i * 3 + 1]);
                const Vec fd = oracle::central_difference(
                    [&](const Vec& x) { return oracle::direct_kernel(m.mdp, PolicyParams::from_flat(4, 3, x).table())(i, j); },
                    m.theta.flat());
                CHECK(oracle::max_rel_error(g, fd) < 1e-6);
            }
            CHECK(row_total.cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("finite-horizon value: closed forms") {
    SUBCASE("zero reward") {
        RandomModelSpec spec{.states = 3, .actions = 2, .seed = 2};
        const RandomModel m = random_model(spec);
        const Mdp zero(std::vector<Mat>{m.mdp.transition(0), m.mdp.transition(1)}, m.mdp.initial(), Mat::Zero(3, 2), 0.9);
        const ValueReport r = finite_horizon_value(zero, m.theta, 6);
        CHECK(r.value == 0.0);
        CHECK(r.grad.cwiseAbs().maxCoeff() == 0.0);
        CHECK(value_gradient(zero, m.theta, 6).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("single state geometric series") {
        const double gamma = 0.95, r = 0.1;
        for (int horizon : {0, 1, 10}) {
            const ValueReport v = finite_horizon_value(single_state_mdp(r, gamma), PolicyParams(1, 1), horizon);
            CHECK(v.value == doctest::Approx(r * (1 - std::pow(gamma, horizon + 1)) / (1 - gamma)).epsilon(1e-14));
        }
    }
    SUBCASE("single state: policy cannot change the value") {
        Mat t(1, 3);
        t << 0.3, -1.0, 2.0;
        const Vec g = value_gradient(single_state_mdp(0.5, 0.9, 3), PolicyParams(t), 5);
        CHECK(g.cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("finite-horizon value matches Monte Carlo rollouts") {
    const RandomModel m = random_model({.states = 4, .actions = 2, .seed = 8, .discount = 0.9});
    const int horizon = 5;
    const double exact = finite_horizon_value(m.mdp, m.theta, horizon).value;
    const Mat pi = oracle::direct_policy(m.theta.table());
    Rng rng(2024);
    const int episodes = 1'000'000;
    double sum = 0.0, sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Index s = rng.categorical(m.mdp.initial());
        double ret = 0.0, disc = 1.0;
        for (int t = 0; t <= horizon; ++t) {
            const Index a = rng.categorical(pi.row(s).transpose());
            ret += disc * m.mdp.reward()(s, a);
            disc *= m.mdp.discount();
            s = rng.categorical(m.mdp.transition(a).row(s).transpose());
        }
        sum += ret;
        sq += ret * ret;
    }
    const double mean = sum / episodes;
    const double se = std::sqrt((sq / episodes - mean * mean) / episodes);
    CHECK(std::abs(mean - exact) < 3 * se);
}

TEST_CASE("value gradient matches finite differences on random models") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng shape(seed * 7);
        const Index n = 1 + static_cast<Index>(shape.uniform() * 5);
        const Index k = 1 + static_cast<Index>(shape.uniform() * 3);
        const int horizon = static_cast<int>(shape.uniform() * 7);
        const RandomModel m = random_model({.states = n, .actions = k, .seed = seed, .theta_scale = 2.0});
        const Vec g = value_gradient(m.mdp, m.theta, horizon);
        const Vec fd = oracle::central_difference(
            [&](const Vec& x) { return finite_horizon_value(m.mdp, PolicyParams::from_flat(n, k, x), horizon).value; },
            m.theta.flat());
        CHECK(oracle::max_rel_error(g, fd) < 1e-6);
        ++checked;
    }
    CHECK(checked == 30);
}

TEST_CASE("infinite-horizon value and gradient") {
    const RandomModel m = random_model({.states = 4, .actions = 3, .seed = 4, .discount = 0.8});
    const ValueReport inf = infinite_horizon_value(m.mdp, m.theta);
    const ValueReport longrun = finite_horizon_value(m.mdp, m.theta, 400);
    CHECK(inf.value == doctest::Approx(longrun.value).epsilon(1e-10));
    CHECK((inf.grad - longrun.grad).cwiseAbs().maxCoeff() < 1e-9);
    const Vec fd = oracle::central_difference(
        [&](const Vec& x) { return infinite_horizon_value(m.mdp, PolicyParams::from_flat(4, 3, x)).value; },
        m.theta.flat());
    CHECK(oracle::max_rel_error(inf.grad, fd) < 1e-6);

    const Mdp undiscounted = single_state_mdp(1.0, 1.0);
    CHECK_THROWS_AS(infinite_horizon_value(undiscounted, PolicyParams(1, 1)), std::invalid_argument);
}

TEST_CASE("REINFORCE estimator is unbiased") {
    const RandomModel m = random_model({.states = 3, .actions = 2, .seed = 6, .discount = 0.9});
    const int horizon = 4;
    const ValueReport exact = finite_horizon_value(m.mdp, m.theta, horizon);
    const int batches = 40;
    Rng rng(77);
    Mat grads(batches, m.theta.dim());
    Vec values(batches);
    for (int b = 0; b < batches; ++b) {
        const SampledValue est = reinforce_value_gradient(m.mdp, m.theta, horizon, 5000, rng);
        grads.row(b) = est.grad.transpose();
        values[b] = est.value;
    }
    const Vec mean = grads.colwise().mean().transpose();
    for (Index d = 0; d < mean.size(); ++d) {
        const double var = (grads.col(d).array() - mean[d]).square().sum() / (batches - 1);
        CHECK(std::abs(mean[d] - exact.grad[d]) < 4.0 * std::sqrt(var / batches));
    }
    const double vmean = values.mean();
    const double vse = std::sqrt((values.array() - vmean).square().sum() / (batches - 1) / batches);
    CHECK(std::abs(vmean - exact.value) < 4.0 * vse);
}
