#pragma once

#include "opacity/entropy.hpp"
#include "opacity/hmm.hpp"
#include "opacity/mdp.hpp"

#include <array>
#include <string>
#include <vector>

namespace opacity {

/// Grid coordinates: x grows east, y grows north, (0, 0) is the south-west corner.
struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
    auto operator<=>(const Cell&) const = default;
};

struct Sensor {
    std::vector<Cell> cells;
    std::string symbol;
    double hit_prob = 0.9;
};

enum class Move : int { North = 0, South = 1, East = 2, West = 3, Stay = 4 };
inline constexpr std::array<const char*, 5> kMoveNames{"N", "S", "E", "W", "stay"};
inline constexpr const char* kNullSymbol = "0";

struct GridSpec {
    int width = 6;
    int height = 6;
    /// Probability of slipping to each of the two perpendicular directions.
    double slip = 0.1;
    std::vector<Sensor> sensors;
    std::vector<Cell> secret_cells;
    std::vector<Cell> goal_cells;
    std::vector<Cell> initial_cells;
    std::vector<double> initial_weights;
    double goal_reward = 0.1;
    double discount = 0.95;

    /// The bundled 6x6 layout: four sensors, two secret cells, two goal cells,
    /// start in the south-west corner.
    static GridSpec default_layout();
    /// The same layout with a uniform start over the four corners.
    static GridSpec four_corners();

    Index state_of(Cell c) const { return static_cast<Index>(c.y) * width + c.x; }
    Cell cell_of(Index state) const {
        return {static_cast<int>(state % width), static_cast<int>(state / width)};
    }
    bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    void validate() const;
};

struct GridWorld {
    GridSpec spec;
    Mdp mdp;
    ObservationModel obs;

    SecretSpec secret() const;
};

/// N = width * height states, K = 5 actions (N, S, E, W, stay).
GridWorld build_gridworld(const GridSpec& spec);

/// Text picture of the layout, north row first: S start, ? secret, G goal,
/// sensor symbol for covered cells, '.' otherwise.
std::string render_layout(const GridSpec& spec);

}  // namespace opacity
