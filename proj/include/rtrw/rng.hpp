#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace rtrw {

// SplitMix64 finalizer; also used to mix seeds and labels into substreams.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
    splitmix64(s);
    return splitmix64(s);
}

// Zigzag map Z -> N used to index per-site substreams.
constexpr std::uint64_t site_index(std::int64_t x) {
    return x >= 0 ? 2 * static_cast<std::uint64_t>(x) : 2 * static_cast<std::uint64_t>(-(x + 1)) + 1;
}

// xoshiro256++ stream. Satisfies UniformRandomBitGenerator so it can drive
// the <random> distributions. Streams are derived from (seed, label, index)
// so every replica and every site gets an order-independent substream.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed = 0) { reseed(seed); }

    static Stream derive(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
        return Stream(mix_seed(mix_seed(master, hash_label(label)), index));
    }
    Stream child(std::string_view label, std::uint64_t index = 0) const {
        return derive(seed_, label, index);
    }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        normal_.reset();
        draws_ = 0;
    }
    std::uint64_t seed() const { return seed_; }
    // Raw 64-bit draws since seeding; a deterministic measure of work.
    std::uint64_t draws() const { return draws_; }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        ++draws_;
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    // Uniform on (0,1), safe for logarithms.
    double uniform_pos() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }
    bool coin() { return ((*this)() >> 63) != 0; }
    double exponential() { return -std::log(uniform_pos()); }
    double normal() { return normal_(*this); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
    std::uint64_t seed_ = 0;
    std::uint64_t draws_ = 0;
    std::normal_distribution<double> normal_;
};

}  // namespace rtrw
