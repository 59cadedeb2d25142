#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace gradova {

// splitmix64; used to expand seeds and to derive per-component streams.
struct SplitMix64 {
    uint64_t state;
    uint64_t next();
};

// Seed for component stream `component` of a run rooted at `root`.
// All randomness in a run flows from one root seed through this function.
uint64_t derive_seed(uint64_t root, uint64_t component);

// xoshiro256++, state expanded from the seed with splitmix64. The generator
// algorithm is pinned so datasets and training runs reproduce exactly.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // 53-bit draw in [0, 1).
    double next_double();

    double uniform(double lo, double hi);

    // Box-Muller; the second value of each pair is cached.
    double normal();

    // next_u64() % bound. bound must be positive.
    uint64_t below(uint64_t bound);

    // Fisher-Yates, walking down from the back.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::array<uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gradova
