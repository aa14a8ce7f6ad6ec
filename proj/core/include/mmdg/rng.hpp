#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mmdg {

/// Deterministic PRNG with a single u64 of state (splitmix64 core).
/// The whole state serializes as one integer, which keeps checkpoint
/// resume bit-exact, and the stream is identical on every platform.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the spare value is discarded so the
    /// generator state stays a single integer.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Unbiased integer in [0, n) via rejection.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derives an independent stream from this seed and a tag. Used to give
    /// every (split, setting, seed) training run its own stream no matter in
    /// which order runs execute.
    static uint64_t derive(uint64_t seed, uint64_t tag) {
        Rng r(seed * 0x9E3779B97F4A7C15ULL + tag);
        r.next_u64();
        return r.next_u64();
    }

  private:
    uint64_t state_;
};

/// FNV-1a over a byte range; used for dataset content hashes and stream tags.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xCBF29CE484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline uint64_t fnv1a64_str(const std::string& s, uint64_t h = 0xCBF29CE484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

}  // namespace mmdg
