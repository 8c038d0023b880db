#pragma once

// Counter-based random substreams.
//
// Every random quantity in a simulation is addressed by the tuple
// (master seed, run, iteration, source node, destination node, channel).
// The tuple is hashed into the starting state of a small SplitMix64
// generator, so any draw can be reproduced without replaying the ones
// before it and results do not depend on how runs are scheduled.

#include <cstdint>
#include <limits>

namespace difflab {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : state_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

enum class Channel : std::uint8_t {
    Data = 0,     // a node's own clean regressor and observation noise
    InputX = 1,   // regressor exchanged over a link
    OutputY = 2,  // scalar output exchanged over a link
    Weight = 3,   // intermediate estimate exchanged over a link
};

class Substreams {
public:
    constexpr Substreams(std::uint64_t master_seed, std::uint64_t run) noexcept
        : run_key_(mix64(mix64(master_seed ^ 0x6a09e667f3bcc909ULL) + run)) {}

    constexpr CounterRng stream(std::uint64_t iteration, std::uint64_t from, std::uint64_t to,
                                Channel channel) const noexcept {
        std::uint64_t key = mix64(run_key_ + 0x9e3779b97f4a7c15ULL * (iteration + 1));
        key = mix64(key ^ ((from << 32) | (to & 0xffffffffULL)));
        key = mix64(key + static_cast<std::uint64_t>(channel) + 1);
        return CounterRng(key);
    }

private:
    std::uint64_t run_key_;
};

}  // namespace difflab
