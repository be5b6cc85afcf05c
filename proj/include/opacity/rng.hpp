#pragma once

#include "opacity/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace opacity {

/**
 * Seeded random stream with portable draws.
 *
 * Uses mt19937_64 for the bits and its own uniform/categorical mapping, since
 * the standard distributions are implementation-defined and would break the
 * byte-identical rerun contract across toolchains.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Index drawn from a probability vector by inverse CDF.
    Index categorical(const Vec& probabilities);

private:
    std::mt19937_64 engine_;
};

/// Seed of the sub-stream named `label` under `master`. Streams for distinct
/// labels are independent of each other, so adding a consumer never shifts another.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace opacity
