#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

namespace qig {

/// Seedable xoshiro256** stream. All randomness in a run flows through one
/// parent stream; batch elements get child streams split off serially so the
/// draw order is independent of the worker count. State is four 64-bit words,
/// serialized as hex for checkpoints.
class Rng {
  public:
    Rng() : Rng(0x9e3779b97f4a7c15ULL) {}

    explicit Rng(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the full state
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1] (safe as a log argument).
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Lemire multiply-shift; slight modulo bias is
    /// irrelevant at the sizes used here and keeps the draw count fixed.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per draw and
    /// discards the sine branch, so the stream carries no hidden cache.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Child stream derived from one parent draw.
    Rng split() { return Rng(next_u64()); }

    std::string serialize() const;
    static Rng deserialize(const std::string& hex);

    bool operator==(const Rng& other) const { return state_ == other.state_; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

} // namespace qig
