#pragma once
#include <cstdint>
#include <random>
#include <string_view>

namespace recoverl {

// Seed derivation for independent streams. Results are pinned: changing the
// mixing here invalidates every recorded run.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index = 0);

// mt19937_64 with our own output mappings. The std distributions are
// implementation-defined, so uniform and normal are done by hand to keep
// sampled values identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1), 53-bit resolution
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, caches the second deviate
    double normal();

    // integer in [0, n), multiply-shift reduction
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace recoverl
