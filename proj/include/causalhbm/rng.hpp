#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace causalhbm {

// Deterministic random stream with explicit substream derivation.
//
// All randomized code in this project draws from Rng rather than from the
// standard distributions, which are implementation-defined. Substreams are
// derived from the originating seed (not the generator state), so
// child(k) is independent of how many draws were consumed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

    // Independent substream addressed by one or more path components.
    Rng child(std::uint64_t a) const { return Rng(combine(seed_, a)); }
    Rng child(std::uint64_t a, std::uint64_t b) const { return child(a).child(b); }
    Rng child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return child(a).child(b).child(c);
    }

    std::uint64_t bits() { return gen_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection keeps the draw exact
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = bits();
        while (x >= limit) x = bits();
        return x % n;
    }

    // Standard normal via Box-Muller (second value cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t combine(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed) ^ (stream + 0x9e3779b97f4a7c15ULL));
    }

    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Well-known substream tags, kept in one place so derivations stay stable.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kEpoch = 2;
inline constexpr std::uint64_t kTask = 3;
inline constexpr std::uint64_t kWarmStart = 4;
inline constexpr std::uint64_t kValidation = 5;
inline constexpr std::uint64_t kPredict = 6;
inline constexpr std::uint64_t kDistance = 7;
inline constexpr std::uint64_t kCluster = 8;
inline constexpr std::uint64_t kGenerate = 9;
inline constexpr std::uint64_t kEmbedding = 10;
inline constexpr std::uint64_t kGlobalKl = 11;
}  // namespace stream

}  // namespace causalhbm
