#include "opacity/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace opacity {

namespace {

std::vector<Cell> rect(int x0, int x1, int y0, int y1) {
    std::vector<Cell> out;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.push_back({x, y});
    return out;
}

std::string describe(Cell c) {
    return "(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
}

constexpr std::array<std::array<int, 2>, 5> kDelta{{{0, 1}, {0, -1}, {1, 0}, {-1, 0}, {0, 0}}};

// Perpendicular directions for each compass move.
constexpr std::array<std::array<Move, 2>, 4> kSlips{{
    {Move::East, Move::West},    // North
    {Move::East, Move::West},    // South
    {Move::North, Move::South},  // East
    {Move::North, Move::South},  // West
}};

}  // namespace

GridSpec GridSpec::default_layout() {
    GridSpec spec;
    spec.sensors = {
        {rect(0, 1, 2, 3), "b", 0.9},
        {rect(2, 3, 4, 5), "r", 0.9},
        {rect(2, 3, 0, 1), "y", 0.9},
        {rect(4, 5, 2, 3), "g", 0.9},
    };
    spec.secret_cells = {{2, 3}, {3, 2}};
    spec.goal_cells = {{2, 2}, {3, 3}};
    spec.initial_cells = {{0, 0}};
    spec.initial_weights = {1.0};
    return spec;
}

GridSpec GridSpec::four_corners() {
    GridSpec spec = default_layout();
    spec.initial_cells = {{0, 0}, {0, 5}, {5, 0}, {5, 5}};
    spec.initial_weights = {0.25, 0.25, 0.25, 0.25};
    return spec;
}

void GridSpec::validate() const {
    if (width < 1 || height < 1) throw ModelError("grid must have positive dimensions");
    if (!(slip >= 0.0 && slip < 0.5)) throw ModelError("slip probability must lie in [0, 0.5)");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ModelError("discount must lie in [0, 1]");
    if (!std::isfinite(goal_reward)) throw ModelError("goal reward must be finite");
    const auto check_cells = [&](const std::vector<Cell>& cells, const std::string& what) {
        for (const Cell& c : cells)
            if (!contains(c)) throw ModelError(what + " cell " + describe(c) + " lies outside the grid");
    };
    std::set<std::string> symbols;
    std::map<Cell, std::string> owner;
    for (const Sensor& s : sensors) {
        if (s.symbol.empty() || s.symbol == kNullSymbol)
            throw ModelError("sensor symbol must be non-empty and different from \"0\"");
        if (!symbols.insert(s.symbol).second) throw ModelError("duplicate sensor symbol '" + s.symbol + "'");
        if (!(s.hit_prob >= 0.0 && s.hit_prob <= 1.0)) throw ModelError("sensor hit probability must lie in [0, 1]");
        check_cells(s.cells, "sensor '" + s.symbol + "'");
        for (const Cell& c : s.cells) {
            const auto [it, fresh] = owner.emplace(c, s.symbol);
            if (!fresh && it->second != s.symbol)
                throw ModelError("sensors '" + it->second + "' and '" + s.symbol + "' overlap at " + describe(c));
        }
    }
    check_cells(secret_cells, "secret");
    check_cells(goal_cells, "goal");
    check_cells(initial_cells, "initial");
    if (initial_cells.empty()) throw ModelError("grid needs at least one initial cell");
    if (initial_weights.size() != initial_cells.size())
        throw ModelError("initial weights must match the initial cells");
    double total = 0.0;
    for (double w : initial_weights) {
        if (!(w >= 0.0)) throw ModelError("initial weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ModelError("initial weights must sum to 1");
}

SecretSpec GridWorld::secret() const {
    SecretSpec secret;
    for (const Cell& c : spec.secret_cells) secret.secret_states.push_back(spec.state_of(c));
    std::sort(secret.secret_states.begin(), secret.secret_states.end());
    secret.secret_states.erase(std::unique(secret.secret_states.begin(), secret.secret_states.end()),
                               secret.secret_states.end());
    return secret;
}

GridWorld build_gridworld(const GridSpec& spec) {
    spec.validate();
    const Index n = static_cast<Index>(spec.width) * spec.height;
    const auto target = [&](Cell c, Move m) {
        const auto& d = kDelta[static_cast<std::size_t>(m)];
        const Cell next{c.x + d[0], c.y + d[1]};
        return spec.contains(next) ? spec.state_of(next) : spec.state_of(c);
    };

    std::vector<Mat> transitions(kMoveNames.size(), Mat::Zero(n, n));
    for (Index s = 0; s < n; ++s) {
        const Cell c = spec.cell_of(s);
        for (std::size_t a = 0; a < 4; ++a) {
            const auto m = static_cast<Move>(a);
            transitions[a](s, target(c, m)) += 1.0 - 2.0 * spec.slip;
            for (Move side : kSlips[a]) transitions[a](s, target(c, side)) += spec.slip;
        }
        transitions[static_cast<std::size_t>(Move::Stay)](s, s) = 1.0;
    }

    Vec initial = Vec::Zero(n);
    for (std::size_t k = 0; k < spec.initial_cells.size(); ++k)
        initial[spec.state_of(spec.initial_cells[k])] += spec.initial_weights[k];

    Mat reward = Mat::Zero(n, static_cast<Index>(kMoveNames.size()));
    for (const Cell& g : spec.goal_cells) reward.row(spec.state_of(g)).setConstant(spec.goal_reward);

    std::vector<std::string> symbols{kNullSymbol};
    for (const Sensor& s : spec.sensors) symbols.push_back(s.symbol);
    Mat emission = Mat::Zero(n, static_cast<Index>(symbols.size()));
    emission.col(0).setOnes();
    for (std::size_t k = 0; k < spec.sensors.size(); ++k) {
        const Sensor& sensor = spec.sensors[k];
        for (const Cell& c : sensor.cells) {
            const Index s = spec.state_of(c);
            emission(s, static_cast<Index>(k) + 1) = sensor.hit_prob;
            emission(s, 0) = 1.0 - sensor.hit_prob;
        }
    }

    return {spec, Mdp(std::move(transitions), std::move(initial), std::move(reward), spec.discount),
            ObservationModel(std::move(symbols), std::move(emission))};
}

std::string render_layout(const GridSpec& spec) {
    std::vector<std::string> rows(static_cast<std::size_t>(spec.height), std::string(static_cast<std::size_t>(spec.width), '.'));
    const auto put = [&](Cell c, char ch) {
        rows[static_cast<std::size_t>(spec.height - 1 - c.y)][static_cast<std::size_t>(c.x)] = ch;
    };
    for (const Sensor& s : spec.sensors)
        for (const Cell& c : s.cells) put(c, s.symbol.front());
    for (const Cell& c : spec.goal_cells) put(c, 'G');
    for (const Cell& c : spec.secret_cells) put(c, '?');
    for (const Cell& c : spec.initial_cells) put(c, 'S');
    std::string out;
    for (const std::string& r : rows) out += r + "\n";
    return out;
}

}  // namespace opacity
