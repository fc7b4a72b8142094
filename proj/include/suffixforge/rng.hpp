#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "suffixforge/errors.hpp"

namespace suffixforge {

// FNV-1a 64-bit over raw bytes; used for seed derivation and content hashes.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

// Deterministic, platform-independent generator (splitmix64). The standard
// distributions are implementation-defined, so sampling is done by hand to
// keep artifacts byte-identical everywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    uint64_t bounded(uint64_t n) {
        if (n == 0) throw DomainError("rng: bounded(0) is undefined");
        const uint64_t threshold = n == 1 ? 0 : (~uint64_t{0} - (~uint64_t{0}) % n);
        for (;;) {
            uint64_t v = next();
            if (n == 1) return 0;
            if (v < threshold) return v % n;
        }
    }

    // standard normal via Box-Muller (cached spare)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(bounded(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// stable sub-seed for a named stream
inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
    uint64_t h = fnv1a64(tag);
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace suffixforge
