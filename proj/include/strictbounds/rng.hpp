#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "strictbounds/types.hpp"

namespace strictbounds {

// Seed schedule: every random quantity is drawn from a stream whose seed is
// derive_seed(master, {purpose, index...}). Streams never share engines, so a
// replicate's draws do not depend on worker count or completion order.
namespace stream {
inline constexpr std::uint64_t problem = 1;
inline constexpr std::uint64_t state = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t grid = 4;
inline constexpr std::uint64_t external = 5;
inline constexpr std::uint64_t instance = 6;
} // namespace stream

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, std::initializer_list<std::uint64_t> path)
        : engine_(derive_seed(master, path)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    Vector normal_vector(Index n);
    Matrix normal_matrix(Index rows, Index cols);
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace strictbounds
