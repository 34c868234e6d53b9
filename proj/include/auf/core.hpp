#pragma once

// Shared value types, error hierarchy and the deterministic random streams
// used throughout the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace auf {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define AUF_DEFINE_ERROR(Name)                       \
    class Name : public Error {                      \
    public:                                          \
        using Error::Error;                          \
    }

AUF_DEFINE_ERROR(ParseError);
AUF_DEFINE_ERROR(UnsupportedFormat);
AUF_DEFINE_ERROR(AllFreeError);
AUF_DEFINE_ERROR(DegenerateRegion);
AUF_DEFINE_ERROR(EmptyPlan);
AUF_DEFINE_ERROR(TooFewSamples);
AUF_DEFINE_ERROR(NoShiftAvailable);
AUF_DEFINE_ERROR(ConfigError);

#undef AUF_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr bool operator==(const Vec2&) const = default;

    [[nodiscard]] constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    [[nodiscard]] double norm() const { return std::hypot(x, y); }
    [[nodiscard]] constexpr double squared_norm() const { return x * x + y * y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Pixel {
    int col = 0;
    int row = 0;
    constexpr bool operator==(const Pixel&) const = default;
};

// ---------------------------------------------------------------------------
// Bands
// ---------------------------------------------------------------------------

enum class Band : std::uint8_t { B24 = 0, B5 = 1 };

inline constexpr int kNumBands = 2;
inline constexpr Band kBands[kNumBands] = {Band::B24, Band::B5};

inline constexpr int band_index(Band b) { return static_cast<int>(b); }
inline constexpr Band other_band(Band b) { return b == Band::B24 ? Band::B5 : Band::B24; }

inline std::string_view band_name(Band b) { return b == Band::B24 ? "2.4" : "5"; }

inline Band parse_band(std::string_view s) {
    if (s == "2.4" || s == "24" || s == "B24") return Band::B24;
    if (s == "5" || s == "B5") return Band::B5;
    throw ParseError("unknown band '" + std::string(s) + "'");
}

// RSSI domain limits in dBm.
inline constexpr double kRssiFloor = -100.0;
inline constexpr double kRssiCeil = 0.0;

inline double clamp_rssi(double v) { return std::clamp(v, kRssiFloor, kRssiCeil); }

// ---------------------------------------------------------------------------
// Randomness
//
// Everything random flows from 64-bit seeds. Sequential streams wrap
// std::mt19937_64 (whose output sequence is fixed by the standard) and
// derive uniforms/normals by hand, because the std distributions are
// implementation-defined. Stateless draws (temporal segments, epoch shifts)
// use a counter-based hash so that they are pure functions of their keys.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

template <typename... Ts>
constexpr std::uint64_t hash_keys(std::uint64_t seed, Ts... keys) {
    std::uint64_t h = splitmix64(seed);
    ((h = hash_combine(h, static_cast<std::uint64_t>(keys))), ...);
    return h;
}

inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Uniform in (0, 1) from 64 random bits.
inline double bits_to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal from two independent 64-bit words (Box-Muller).
inline double bits_to_normal(std::uint64_t a, std::uint64_t b) {
    const double u1 = bits_to_unit(a);
    const double u2 = bits_to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Stateless standard normal keyed on (seed, keys...).
template <typename... Ts>
double keyed_normal(std::uint64_t seed, Ts... keys) {
    const std::uint64_t h = hash_keys(seed, keys...);
    return bits_to_normal(h, splitmix64(h));
}

template <typename... Ts>
double keyed_uniform(std::uint64_t seed, Ts... keys) {
    return bits_to_unit(hash_keys(seed, keys...));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Independent child stream identified by name.
    [[nodiscard]] static Rng stream(std::uint64_t seed, std::string_view name) {
        return Rng(hash_combine(splitmix64(seed), hash_string(name)));
    }

    double uniform() { return bits_to_unit(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }
    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double mean) { return -mean * std::log(uniform()); }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace auf
