#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace fc {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Child key for `tag` under `parent`; distinct tags give unrelated streams.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag)
{
    return mix64(mix64(parent ^ 0x6a09e667f3bcc909ull) + mix64(tag + 0x9e3779b97f4a7c15ull));
}

/// Per-pair stream key from (root seed, image id, pair index).
inline std::uint64_t pair_key(std::uint64_t root, std::string_view image_id, std::uint64_t index)
{
    return derive_key(derive_key(root, fnv1a(image_id)), index);
}

/// Counter-based generator: the n-th output is a pure function of (key, n),
/// so streams can be split and replayed without shared state.
class CounterRng
{
  public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) : key_(mix64(key)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

    /// Independent child stream; does not advance this one.
    CounterRng split(std::uint64_t tag) const { return CounterRng(derive_key(key_, tag)); }

    std::uint64_t counter() const { return counter_; }

    /// Uniform double in [0,1) with 53 random bits.
    double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [lo, hi] (inclusive), unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
        if (span == 0)
            return static_cast<std::int64_t>((*this)());
        const std::uint64_t limit = max() - max() % span;
        std::uint64_t v = (*this)();
        while (v >= limit)
            v = (*this)();
        return lo + static_cast<std::int64_t>(v % span);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (one draw per call).
    double normal()
    {
        double u1 = uniform01();
        while (u1 <= 0.0)
            u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace fc
