// SPDX-License-Identifier: Apache-2.0
//
// imisac - intelligent metasurface ISAC transceiver simulator
// ------------------------------------------------------------------------

#pragma once

#include "imisac/common.hpp"

#include <cstdint>
#include <random>

namespace imisac
{
    // Substream identifiers for splitting a master seed. Values are part of the
    // reproducibility contract: changing them changes every emitted artifact.
    enum class Stream : std::uint64_t
    {
        Channel = 1,
        Optimizer = 2,
        Estimation = 3,
        Waveform = 4,
        Feeds = 5,
        Initial = 6,
    };

    std::uint64_t splitmix64(std::uint64_t x);

    // seed_for(master, stream, index) = splitmix64(splitmix64(master ^ stream * C) + index)
    // with C the 64-bit golden-ratio constant.
    std::uint64_t seed_for(std::uint64_t master, Stream stream, std::uint64_t index = 0);

    // Seeded generator with platform-independent uniform/normal draws.
    // std::*_distribution outputs are implementation-defined, so they are not used.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : engine_(seed) {}

        // Uniform on [0, 1) with 53 random bits.
        double uniform();
        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
        double phase() { return kTwoPi * uniform(); }
        double normal();
        // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
        cplx complex_normal(double variance = 1.0);
        CMatrix complex_normal(Eigen::Index rows, Eigen::Index cols, double variance = 1.0);
        std::uint64_t next_u64() { return engine_(); }

    private:
        std::mt19937_64 engine_;
        bool has_spare_ = false;
        double spare_ = 0.0;
    };
}
