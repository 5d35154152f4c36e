#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace birkhoff::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-stream derivation: every module draws from streams keyed by
//
//   substream(seed, "label")
//
// so adding a stage never perturbs another stage's randomness.
inline std::uint64_t substream(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h));
}

// Per-unit engine (unit = path index, instance index, ...). Deterministic in
// (stream, unit) only, so parallel schedules cannot change results.
inline std::mt19937_64 engine(std::uint64_t stream, std::uint64_t unit) {
    return std::mt19937_64(splitmix64(stream ^ splitmix64(unit + 0x51ed2701a2b7f84dULL)));
}

inline double uniform01(std::mt19937_64& eng) {
    // 53-bit mantissa in (0, 1]; never returns 0 so log() below is safe.
    return (double(eng() >> 11) + 1.0) * 0x1p-53;
}

// Box-Muller on top of mt19937_64: bit-reproducible across standard library
// implementations, unlike std::normal_distribution.
inline void fill_standard_normals(std::mt19937_64& eng, Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index i = 0;
    while (i < out.size()) {
        const double u1 = uniform01(eng);
        const double u2 = uniform01(eng);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        out(i++) = r * std::cos(a);
        if (i < out.size()) out(i++) = r * std::sin(a);
    }
}

inline double standard_normal(std::mt19937_64& eng) {
    const double u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace birkhoff::rng
