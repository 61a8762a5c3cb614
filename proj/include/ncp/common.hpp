#ifndef NCP_COMMON_HPP
#define NCP_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncp {

inline constexpr const char* kVersion = "0.1.0";

/// Bad input: out-of-range values, malformed codes, inconsistent records.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-level failures: unreadable paths, corrupt or wrong-version payloads.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded random source with fully specified draws. The engine (mt19937_64)
/// and every derived distribution below are pinned by this header, so a seed
/// produces the same stream on every platform; std::uniform_int_distribution
/// and friends are deliberately not used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Exactly uniform integer in [0, n). Lemire reduction with rejection.
    std::uint64_t below(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = -n % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (two uniforms per draw, no cache).
    double gaussian() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    /// Fisher-Yates over [first, last) index permutation.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Smooth L1 (Huber with beta = 1): quadratic inside |d| < 1, linear outside.
inline double smooth_l1(double pred, double target) {
    const double d = pred - target;
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

/// d/dpred of smooth_l1; continuous at |d| = 1.
inline double smooth_l1_grad(double pred, double target) {
    const double d = pred - target;
    if (d > 1.0) return 1.0;
    if (d < -1.0) return -1.0;
    return d;
}

} // namespace ncp

#endif // NCP_COMMON_HPP
