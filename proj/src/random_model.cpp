#include "opacity/random_model.hpp"

#include "opacity/rng.hpp"

#include <string>

namespace opacity {

namespace {

Vec random_simplex(Index size, Rng& rng) {
    Vec v(size);
    for (Index k = 0; k < size; ++k) v[k] = 0.05 + rng.uniform();
    return v / v.sum();
}

}  // namespace

RandomModel random_model(const RandomModelSpec& spec) {
    if (spec.states < 1 || spec.actions < 1 || spec.symbols < 1)
        throw std::invalid_argument("random model needs positive sizes");
    Rng rng(spec.seed);
    const Index n = spec.states;
    std::vector<Mat> transitions;
    for (Index a = 0; a < spec.actions; ++a) {
        Mat p(n, n);
        for (Index i = 0; i < n; ++i) p.row(i) = random_simplex(n, rng).transpose();
        transitions.push_back(std::move(p));
    }
    Vec initial = random_simplex(n, rng);
    Mat reward(n, spec.actions);
    for (Index i = 0; i < n; ++i)
        for (Index a = 0; a < spec.actions; ++a) reward(i, a) = rng.uniform();
    Mat emission(n, spec.symbols);
    for (Index i = 0; i < n; ++i) emission.row(i) = random_simplex(spec.symbols, rng).transpose();
    Mat theta(n, spec.actions);
    for (Index i = 0; i < n; ++i)
        for (Index a = 0; a < spec.actions; ++a) theta(i, a) = spec.theta_scale * (2.0 * rng.uniform() - 1.0);

    std::vector<std::string> symbols;
    for (Index o = 0; o < spec.symbols; ++o) symbols.push_back("o" + std::to_string(o));
    return {Mdp(std::move(transitions), std::move(initial), std::move(reward), spec.discount),
            ObservationModel(std::move(symbols), std::move(emission)), PolicyParams(std::move(theta))};
}

}  // namespace opacity
