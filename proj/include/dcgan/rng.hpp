#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace dcgan {

/// SplitMix64 finalizer, used to derive independent seeds from (seed, stream, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

/// Seeded generator with a portable normal sampler.
///
/// std::normal_distribution is implementation-defined and caches values, so
/// normals are produced by Box-Muller on top of mt19937_64. No hidden state
/// exists beyond the engine, which makes `state()` sufficient to resume.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();
    void fill_normal(std::span<double> out, double mean = 0.0, double stddev = 1.0);

    std::string state() const;
    void restore(const std::string& state);

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace dcgan
