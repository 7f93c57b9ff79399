#pragma once

// Deterministic random number generation with per-stream substreams.
// Every Monte Carlo path / scenario gets its own Rng constructed from
// (seed, stream_index), so results are independent of how work is
// partitioned across threads and bit-identical across runs.

#include <cstdint>
#include <random>

namespace epor {

// splitmix64 — used to scramble (seed, stream) into engine seed material.
std::uint64_t splitmix64(std::uint64_t& state);

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    double uniform();               // (0, 1)
    double normal();                // standard normal, via inverse CDF
    double exponential();           // rate 1
    std::uint64_t next_u64();

private:
    std::mt19937_64 gen_;
};

} // namespace epor
