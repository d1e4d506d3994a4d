#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace proguide {

// Seeded generator whose draws are fixed by the seed alone: std::mt19937_64
// output is specified by the standard, and bounded draws use plain rejection
// sampling instead of the implementation-defined std distributions.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    // Uniform real in [0, 1) with 53 random bits.
    double unit();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // k distinct positions of [0, n) in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

// Mixes several values into one seed (splitmix64 finalizer per step).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);

}  // namespace proguide
