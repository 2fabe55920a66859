// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace laser {

// Seed for the deterministic generator. Same seed, same stream, bit for bit,
// on every platform.
struct RngSeed {
    std::uint64_t value = 0;
};

// SplitMix64 generator with explicit, platform-stable distributions.
//
// The standard <random> distributions are implementation-defined, which would
// break the byte-identical-outputs contract, so uniform and Gaussian draws
// are spelled out here. split(stream) derives an independent child stream
// without advancing the parent; deriving per-item streams this way makes
// parallel and serial generation agree exactly.
class Rng {
public:
    explicit Rng(RngSeed seed) : state_(seed.value) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Lemire multiply-shift; slight bias is
    // irrelevant at these ranges and the draw is a single stream step.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - next_double(); // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Child stream `stream` of this generator's current state. Does not
    // consume parent state.
    Rng split(std::uint64_t stream) const {
        std::uint64_t z = state_ + 0x9E3779B97F4A7C15ULL * (stream + 1);
        z = mix(z);
        z = mix(z ^ 0xBF58476D1CE4E5B9ULL);
        return Rng(RngSeed{z});
    }

    RngSeed split_seed(std::uint64_t stream) const {
        return RngSeed{split(stream).state_};
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

} // namespace laser
