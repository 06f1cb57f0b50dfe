#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mmgr {

/// Seeded pseudo-random source. The engine is std::mt19937_64 (its output
/// sequence is fixed by the standard); the real-valued draws are derived
/// here so that streams are identical across standard library vendors.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return m_seed; }

    std::uint64_t next_u64() { return m_engine(); }
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    /// Independent child stream; used to give sub-tasks their own generator.
    Rng split();

private:
    std::uint64_t m_seed;
    std::mt19937_64 m_engine;
    bool m_has_spare = false;
    double m_spare = 0.0;
};

}  // namespace mmgr
