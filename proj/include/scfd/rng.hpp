#ifndef SCFD_RNG_HPP
#define SCFD_RNG_HPP

#include <array>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace scfd {

// splitmix64, used only to expand seeds into full generator states.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++. Streams are derived from (seed, stream_id) so that any
// partition of work into fixed batches draws identical numbers no matter
// how batches are assigned to threads.
class Xoshiro256 {
public:
    Xoshiro256(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
        for (auto& w : s_) w = splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next() {
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

    // uniform on [0,1) with 53 random bits
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> s_{};
};

// Inverse-CDF sampler for a finite probability vector.
class CategoricalSampler {
public:
    explicit CategoricalSampler(const std::vector<double>& p) : cdf_(p) {
        double acc = 0.0;
        for (auto& c : cdf_) {
            acc += c;
            c = acc;
        }
        if (!cdf_.empty()) cdf_.back() = 1.0;
    }

    std::uint8_t operator()(Xoshiro256& rng) const {
        const double u = rng.uniform();
        for (std::size_t i = 0; i + 1 < cdf_.size(); ++i)
            if (u < cdf_[i]) return static_cast<std::uint8_t>(i);
        return static_cast<std::uint8_t>(cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

// Stable 64-bit hash of a byte string, for deriving RNG stream ids from
// labels and other structured keys.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace scfd

#endif
