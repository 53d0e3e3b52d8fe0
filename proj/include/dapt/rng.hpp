#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace dapt {

/// Seeded random source with a platform-independent output sequence.
///
/// The engine (mt19937_64) is fully specified by the standard; the
/// distributions below are written out here because the standard library
/// ones are implementation-defined and would break cross-platform
/// reproducibility of datasets and checkpoints.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();

    /// Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n);

    /// Standard normal via Box-Muller (no cached second value).
    double normal();

    /// Normal(0, stddev) resampled until |x| <= limit * stddev.
    double truncated_normal(double stddev, double limit = 2.0);

    /// Derives an independent child seed; used to split streams by purpose.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

private:
    std::mt19937_64 engine_;
};

} // namespace dapt
