#pragma once

#include "opacity/hmm.hpp"
#include "opacity/mdp.hpp"

#include <cstdint>

namespace opacity {

struct RandomModelSpec {
    Index states = 3;
    Index actions = 2;
    Index symbols = 2;
    std::uint64_t seed = 1;
    double discount = 0.9;
    /// Entries of theta are drawn uniformly from [-theta_scale, theta_scale].
    double theta_scale = 1.0;
};

struct RandomModel {
    Mdp mdp;
    ObservationModel obs;
    PolicyParams theta;
};

/// Dense random model: strictly positive transitions, emissions, and initial distribution.
RandomModel random_model(const RandomModelSpec& spec);

}  // namespace opacity
