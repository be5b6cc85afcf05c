#include "opacity/rng.hpp"

namespace opacity {

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

Index Rng::categorical(const Vec& probabilities) {
    const double u = uniform();
    double cumulative = 0.0;
    Index last_positive = -1;
    for (Index k = 0; k < probabilities.size(); ++k) {
        if (probabilities[k] <= 0.0) continue;
        last_positive = k;
        cumulative += probabilities[k];
        if (u < cumulative) return k;
    }
    // rounding left the cumulative sum just below 1
    if (last_positive < 0) throw std::invalid_argument("categorical: no positive probability");
    return last_positive;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
    return splitmix64(splitmix64(master ^ fnv1a64(label)) + index);
}

}  // namespace opacity
