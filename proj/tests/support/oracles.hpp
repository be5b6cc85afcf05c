#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the message-passing or entropy code; everything is enumeration, direct
// formula evaluation, or finite differences.

#include "opacity/entropy.hpp"
#include "opacity/hmm.hpp"
#include "opacity/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

using opacity::Index;
using opacity::Mat;
using opacity::Vec;

/// Central finite difference of a scalar function of the flat parameter vector.
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x, double step = 1e-5) {
    Vec grad(x.size());
    for (Index k = 0; k < x.size(); ++k) {
        Vec plus = x, minus = x;
        plus[k] += step;
        minus[k] -= step;
        grad[k] = (f(plus) - f(minus)) / (2.0 * step);
    }
    return grad;
}

/// max_k |a_k - b_k| / max(|a_k|, |b_k|, floor)
inline double max_rel_error(const Vec& a, const Vec& b, double floor = 1e-3) {
    double worst = 0.0;
    for (Index k = 0; k < a.size(); ++k) {
        const double scale = std::max({std::abs(a[k]), std::abs(b[k]), floor});
        worst = std::max(worst, std::abs(a[k] - b[k]) / scale);
    }
    return worst;
}

/// pi(a|s) straight from the definition, in long double.
inline Mat direct_policy(const Mat& theta) {
    Mat pi(theta.rows(), theta.cols());
    for (Index s = 0; s < theta.rows(); ++s) {
        long double z = 0.0L;
        for (Index a = 0; a < theta.cols(); ++a) z += std::exp(static_cast<long double>(theta(s, a)));
        for (Index a = 0; a < theta.cols(); ++a)
            pi(s, a) = static_cast<double>(std::exp(static_cast<long double>(theta(s, a))) / z);
    }
    return pi;
}

inline Mat direct_kernel(const opacity::Mdp& mdp, const Mat& theta) {
    const Mat pi = direct_policy(theta);
    Mat k = Mat::Zero(mdp.num_states(), mdp.num_states());
    for (Index i = 0; i < mdp.num_states(); ++i)
        for (Index j = 0; j < mdp.num_states(); ++j)
            for (Index a = 0; a < mdp.num_actions(); ++a) k(i, j) += mdp.transition(i, a, j) * pi(i, a);
    return k;
}

/// Visit every state path s_0..s_T with its probability P(path) under `kernel`.
inline void for_each_path(const Mat& kernel, const Vec& mu0, int horizon,
                          const std::function<void(const std::vector<Index>&, double)>& visit) {
    const Index n = kernel.rows();
    std::vector<Index> path(static_cast<std::size_t>(horizon) + 1, 0);
    std::function<void(std::size_t, double)> rec = [&](std::size_t t, double prob) {
        if (t == path.size()) {
            visit(path, prob);
            return;
        }
        for (Index s = 0; s < n; ++s) {
            const double p = t == 0 ? mu0[s] : prob * kernel(path[t - 1], s);
            path[t] = s;
            rec(t + 1, p);
        }
    };
    rec(0, 1.0);
}

inline double emission_prob(const Mat& emission, const std::vector<Index>& path, const opacity::ObsSeq& y) {
    double p = 1.0;
    for (std::size_t t = 0; t < path.size(); ++t) p *= emission(path[t], y[t]);
    return p;
}

/// P(y) by summing over all state paths.
inline double brute_seq_prob(const Mat& kernel, const Mat& emission, const Vec& mu0, const opacity::ObsSeq& y) {
    double total = 0.0;
    for_each_path(kernel, mu0, static_cast<int>(y.size()) - 1,
                  [&](const std::vector<Index>& path, double p) { total += p * emission_prob(emission, path, y); });
    return total;
}

/// P(S_T in E | y) by enumeration.
inline double brute_last_posterior(const Mat& kernel, const Mat& emission, const Vec& mu0, const opacity::ObsSeq& y,
                                   const std::vector<Index>& secret) {
    double joint = 0.0, total = 0.0;
    for_each_path(kernel, mu0, static_cast<int>(y.size()) - 1, [&](const std::vector<Index>& path, double p) {
        const double w = p * emission_prob(emission, path, y);
        total += w;
        if (std::find(secret.begin(), secret.end(), path.back()) != secret.end()) joint += w;
    });
    return joint / total;
}

/// P(S_0 = . | y) by enumeration.
inline Vec brute_initial_posterior(const Mat& kernel, const Mat& emission, const Vec& mu0, const opacity::ObsSeq& y) {
    Vec joint = Vec::Zero(kernel.rows());
    for_each_path(kernel, mu0, static_cast<int>(y.size()) - 1, [&](const std::vector<Index>& path, double p) {
        joint[path.front()] += p * emission_prob(emission, path, y);
    });
    return joint / joint.sum();
}

/// H(Z_T | Y) or H(S_0 | Y) in bits, from the joint distribution of (secret, y)
/// accumulated over every (path, y) pair.
inline double brute_entropy(const Mat& kernel, const Mat& emission, const Vec& mu0, int horizon,
                            const opacity::Objective& objective) {
    const Index n = kernel.rows();
    const Index symbols = emission.cols();
    std::map<std::vector<Index>, std::vector<double>> joint;  // y -> P(z, y)
    const Index zsize = objective.kind == opacity::Objective::Kind::LastState ? 2 : n;
    opacity::for_each_sequence(symbols, horizon, [&](const opacity::ObsSeq& y) {
        std::vector<double> pz(static_cast<std::size_t>(zsize), 0.0);
        for_each_path(kernel, mu0, horizon, [&](const std::vector<Index>& path, double p) {
            const double w = p * emission_prob(emission, path, y);
            const Index z = objective.kind == opacity::Objective::Kind::LastState
                                ? (objective.secret.contains(path.back()) ? 1 : 0)
                                : path.front();
            pz[static_cast<std::size_t>(z)] += w;
        });
        joint[y] = pz;
    });
    double h = 0.0;
    for (const auto& [y, pz] : joint) {
        double py = 0.0;
        for (double v : pz) py += v;
        if (py <= 0.0) continue;
        for (double v : pz)
            if (v > 0.0) h -= v * std::log2(v / py);
    }
    return h;
}

}  // namespace oracle
