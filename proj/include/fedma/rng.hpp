#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fedma {

// Deterministic 64-bit stream. All randomness in a run flows from one
// root seed through named substreams so that ablating one component
// (sampling, delays, noise, shuffles) does not perturb the others.
//
// Samplers are hand-rolled because the std::<distribution> classes are
// implementation-defined and would break byte-identical replay across
// standard libraries.
class RngStream {
public:
    RngStream() : state_(0x9e3779b97f4a7c15ULL) {}
    explicit RngStream(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {
        // warm up splitmix so nearby seeds decorrelate
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // standard normal via Box-Muller (no cached second value, keeps
    // the stream position a pure function of the draw count)
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Exp(1) via inverse CDF
    double next_exponential() {
        double u = next_double();
        while (u <= 0.0) u = next_double();
        return -std::log(u);
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t hash_name(std::string_view name) {
    // FNV-1a
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    return h;
}

// Derive the substream with the given name from a root seed.
inline RngStream substream(std::uint64_t root_seed, std::string_view name) {
    return RngStream(root_seed ^ hash_name(name));
}

// Derive a per-index substream (e.g. one stream per sweep run).
inline RngStream substream(std::uint64_t root_seed, std::string_view name, std::uint64_t index) {
    return RngStream(root_seed ^ hash_name(name) ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

}  // namespace fedma
