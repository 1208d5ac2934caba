#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace abt {

// SplitMix64 finalizer. Used to derive independent stream seeds from a base
// seed plus structural keys (subject index, epoch, layer id, ...) so that
// checkpoint/resume never has to serialize generator state.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return mix64(base); }

template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key, Keys... rest) {
    return derive_seed(mix64(base ^ mix64(key)), rest...);
}

// Maps a 64-bit word to a double in [0,1) using the top 53 bits.
constexpr double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stateless per-index uniform draw in [0,1). Dropout masks are generated this
// way so the value of element i depends only on (seed, i).
inline double hash_unit(std::uint64_t seed, std::uint64_t index) {
    return unit_double(mix64(seed ^ mix64(index)));
}

// Deterministic random stream. mt19937_64 is fully specified by the standard;
// the uniform/normal mappings are implemented here rather than with
// std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform() { return unit_double(next_u64()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the spare value is cached so consecutive calls stay cheap.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0,1], keeps log() finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Inclusive range, rejection-free modulo with negligible bias at desk scale.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Fisher-Yates with this stream; std::shuffle's draw order is unspecified.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
            std::int64_t j = uniform_int(0, i);
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace abt
