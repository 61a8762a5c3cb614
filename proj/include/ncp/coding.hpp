#ifndef NCP_CODING_HPP
#define NCP_CODING_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ncp/common.hpp"

namespace ncp {

// The architecture coding is a fixed 27-dimensional vector laid out as
//   i1 i2 | b1 n1^1 c1^1 | b2 n2^1 n2^2 c2^1 c2^2 | b3 n3^1..3 c3^1..3 |
//   b4 n4^1..4 c4^1..4 | o1
// Count dimensions (b*, n*) live on the grid {1,2,3,4}; channel dimensions
// (i*, c*, o1) on {8,16,...,128}. ArchCode stores the affine-normalized
// coordinates, so every dimension spans [0,1].

inline constexpr int kCodeDims = 27;

enum class DimKind { Channel, Count };

struct DimBounds {
    double min;
    double max;
    double unit;
};

namespace detail {
inline constexpr std::array<DimKind, kCodeDims> kDimKinds = {
    DimKind::Channel, DimKind::Channel,                                           // i1 i2
    DimKind::Count, DimKind::Count, DimKind::Channel,                             // b1 n1 c1
    DimKind::Count, DimKind::Count, DimKind::Count, DimKind::Channel,
    DimKind::Channel,                                                             // b2 n2x2 c2x2
    DimKind::Count, DimKind::Count, DimKind::Count, DimKind::Count,
    DimKind::Channel, DimKind::Channel, DimKind::Channel,                         // b3 n3x3 c3x3
    DimKind::Count, DimKind::Count, DimKind::Count, DimKind::Count,
    DimKind::Count, DimKind::Channel, DimKind::Channel, DimKind::Channel,
    DimKind::Channel,                                                             // b4 n4x4 c4x4
    DimKind::Channel,                                                             // o1
};

inline constexpr std::array<const char*, kCodeDims> kDimNames = {
    "i1", "i2",
    "b1", "n1_1", "c1_1",
    "b2", "n2_1", "n2_2", "c2_1", "c2_2",
    "b3", "n3_1", "n3_2", "n3_3", "c3_1", "c3_2", "c3_3",
    "b4", "n4_1", "n4_2", "n4_3", "n4_4", "c4_1", "c4_2", "c4_3", "c4_4",
    "o1",
};

// First index of each stage's (b, n..., c...) run; stage s starts the run of
// 2s+1 dimensions.
inline constexpr std::array<int, 4> kStageOffset = {2, 5, 10, 17};
} // namespace detail

inline void check_dim_index(int dim) {
    if (dim < 0 || dim >= kCodeDims)
        throw ValidationError("code dimension index out of range: " + std::to_string(dim));
}

inline DimKind dim_kind(int dim) {
    check_dim_index(dim);
    return detail::kDimKinds[static_cast<std::size_t>(dim)];
}

inline const char* dim_name(int dim) {
    check_dim_index(dim);
    return detail::kDimNames[static_cast<std::size_t>(dim)];
}

inline DimBounds bounds(int dim) {
    return dim_kind(dim) == DimKind::Count ? DimBounds{1.0, 4.0, 1.0}
                                           : DimBounds{8.0, 128.0, 8.0};
}

/// Raw-unit step used when a dimension is edited by one grid notch.
inline double dim_step(int dim) { return bounds(dim).unit; }

/// Architecture code in normalized coordinates; values[i] in [0,1] once
/// clamped. Plain aggregate so codes copy and compare by value.
struct ArchCode {
    std::array<double, kCodeDims> values{};

    double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }

    friend bool operator==(const ArchCode&, const ArchCode&) = default;
};

inline ArchCode clamp01(ArchCode code) {
    for (double& v : code.values) v = std::clamp(v, 0.0, 1.0);
    return code;
}

/// Map one raw-unit value into [0,1].
inline double normalize_dim(int dim, double raw) {
    const DimBounds b = bounds(dim);
    return (raw - b.min) / (b.max - b.min);
}

/// Inverse of normalize_dim; does not round or clamp.
inline double denormalize_dim(int dim, double normalized) {
    const DimBounds b = bounds(dim);
    return b.min + normalized * (b.max - b.min);
}

/// Normalize a full raw vector, rejecting out-of-bounds entries.
inline ArchCode normalize(const std::array<double, kCodeDims>& raw) {
    ArchCode code;
    for (int i = 0; i < kCodeDims; ++i) {
        const DimBounds b = bounds(i);
        const double v = raw[static_cast<std::size_t>(i)];
        if (!(v >= b.min && v <= b.max))
            throw ValidationError(std::string("raw value out of bounds for dimension ") +
                                  std::to_string(i) + " (" + dim_name(i) + "): " +
                                  std::to_string(v));
        code[i] = normalize_dim(i, v);
    }
    return code;
}

/// Continuous raw-unit view of a code (no rounding).
inline std::array<double, kCodeDims> denormalize(const ArchCode& code) {
    std::array<double, kCodeDims> raw{};
    for (int i = 0; i < kCodeDims; ++i) raw[static_cast<std::size_t>(i)] = denormalize_dim(i, code[i]);
    return raw;
}

namespace detail {
// Half away from zero, exact for the magnitudes in play.
inline double round_half_away(double v) {
    return v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
}
} // namespace detail

/// Snap one raw-unit value to its grid: nearest unit multiple, ties away from
/// zero, clamped into bounds.
inline int round_raw_dim(int dim, double raw) {
    const DimBounds b = bounds(dim);
    const double snapped = detail::round_half_away(raw / b.unit) * b.unit;
    return static_cast<int>(std::clamp(snapped, b.min, b.max));
}

/// Clamp a (possibly overshooting) normalized code and snap it to the raw
/// grid. Total on all inputs; idempotent on its own output.
inline std::array<int, kCodeDims> round_code(const ArchCode& code) {
    const ArchCode c = clamp01(code);
    std::array<int, kCodeDims> raw{};
    for (int i = 0; i < kCodeDims; ++i)
        raw[static_cast<std::size_t>(i)] = round_raw_dim(i, denormalize_dim(i, c[i]));
    return raw;
}

enum class Head { Classification, Segmentation };

struct InputGeometry {
    int height = 128;
    int width = 128;
    int in_channels = 3;
    int num_classes = 19;
};

struct StageSpec {
    int blocks = 1;
    std::vector<int> units;     // one entry per branch
    std::vector<int> channels;  // one entry per branch
};

/// Decoded discrete architecture: stem widths, four stages of
/// blocks/units/channels, and the output fusion width.
struct NetworkSpec {
    int stem1 = 8;  // i1
    int stem2 = 8;  // i2
    std::array<StageSpec, 4> stages{};
    int output_width = 8;  // o1
    Head head = Head::Classification;
    InputGeometry input{};
};

inline void validate(const NetworkSpec& spec) {
    auto check_count = [](int v, const std::string& what) {
        if (v < 1 || v > 4) throw ValidationError(what + " must be in {1,2,3,4}, got " + std::to_string(v));
    };
    auto check_channel = [](int v, const std::string& what) {
        if (v < 8 || v > 128 || v % 8 != 0)
            throw ValidationError(what + " must be a multiple of 8 in [8,128], got " + std::to_string(v));
    };
    check_channel(spec.stem1, "i1");
    check_channel(spec.stem2, "i2");
    check_channel(spec.output_width, "o1");
    for (int s = 0; s < 4; ++s) {
        const StageSpec& st = spec.stages[static_cast<std::size_t>(s)];
        const std::string tag = "stage " + std::to_string(s + 1);
        check_count(st.blocks, tag + " blocks");
        if (static_cast<int>(st.units.size()) != s + 1 || static_cast<int>(st.channels.size()) != s + 1)
            throw ValidationError(tag + " must have exactly " + std::to_string(s + 1) + " branch entries");
        for (int j = 0; j <= s; ++j) {
            check_count(st.units[static_cast<std::size_t>(j)], tag + " units branch " + std::to_string(j + 1));
            check_channel(st.channels[static_cast<std::size_t>(j)], tag + " channels branch " + std::to_string(j + 1));
        }
    }
    if (spec.input.height <= 0 || spec.input.width <= 0 || spec.input.in_channels <= 0 ||
        spec.input.num_classes <= 0)
        throw ValidationError("input geometry must be positive");
}

/// Round a code and lay the 27 values out into the stem/stage/output
/// structure.
inline NetworkSpec decode(const ArchCode& code, Head head = Head::Classification,
                          const InputGeometry& input = {}) {
    const std::array<int, kCodeDims> raw = round_code(code);
    NetworkSpec spec;
    spec.stem1 = raw[0];
    spec.stem2 = raw[1];
    for (int s = 0; s < 4; ++s) {
        StageSpec& st = spec.stages[static_cast<std::size_t>(s)];
        const int off = detail::kStageOffset[static_cast<std::size_t>(s)];
        st.blocks = raw[static_cast<std::size_t>(off)];
        st.units.resize(static_cast<std::size_t>(s) + 1);
        st.channels.resize(static_cast<std::size_t>(s) + 1);
        for (int j = 0; j <= s; ++j) {
            st.units[static_cast<std::size_t>(j)] = raw[static_cast<std::size_t>(off + 1 + j)];
            st.channels[static_cast<std::size_t>(j)] = raw[static_cast<std::size_t>(off + 2 + s + j)];
        }
    }
    spec.output_width = raw[26];
    spec.head = head;
    spec.input = input;
    return spec;
}

/// Flatten a spec back into raw units in canonical dimension order.
inline std::array<double, kCodeDims> spec_to_raw(const NetworkSpec& spec) {
    validate(spec);
    std::array<double, kCodeDims> raw{};
    raw[0] = spec.stem1;
    raw[1] = spec.stem2;
    for (int s = 0; s < 4; ++s) {
        const StageSpec& st = spec.stages[static_cast<std::size_t>(s)];
        const int off = detail::kStageOffset[static_cast<std::size_t>(s)];
        raw[static_cast<std::size_t>(off)] = st.blocks;
        for (int j = 0; j <= s; ++j) {
            raw[static_cast<std::size_t>(off + 1 + j)] = st.units[static_cast<std::size_t>(j)];
            raw[static_cast<std::size_t>(off + 2 + s + j)] = st.channels[static_cast<std::size_t>(j)];
        }
    }
    raw[26] = spec.output_width;
    return raw;
}

inline ArchCode encode(const NetworkSpec& spec) { return normalize(spec_to_raw(spec)); }

/// Uniform draw over the discrete grid, returned in normalized coordinates.
inline ArchCode sample(Rng& rng) {
    std::array<double, kCodeDims> raw{};
    for (int i = 0; i < kCodeDims; ++i) {
        if (dim_kind(i) == DimKind::Count)
            raw[static_cast<std::size_t>(i)] = 1.0 + static_cast<double>(rng.below(4));
        else
            raw[static_cast<std::size_t>(i)] = 8.0 * (1.0 + static_cast<double>(rng.below(16)));
    }
    return normalize(raw);
}

inline ArchCode sample(std::uint64_t seed) {
    Rng rng(seed);
    return sample(rng);
}

/// The conventional starting point: every count 2, every width 64.
inline ArchCode default_init_code() {
    std::array<double, kCodeDims> raw{};
    for (int i = 0; i < kCodeDims; ++i)
        raw[static_cast<std::size_t>(i)] = dim_kind(i) == DimKind::Count ? 2.0 : 64.0;
    return normalize(raw);
}

/// Canonical textual form: 27 comma-separated raw integers.
inline std::string format_raw_code(const std::array<int, kCodeDims>& raw) {
    std::string out;
    for (int i = 0; i < kCodeDims; ++i) {
        if (i) out += ',';
        out += std::to_string(raw[static_cast<std::size_t>(i)]);
    }
    return out;
}

inline std::array<int, kCodeDims> parse_raw_code(std::string_view text) {
    std::array<int, kCodeDims> raw{};
    int count = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view tok = text.substr(pos, comma - pos);
        while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
        while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
        if (count >= kCodeDims)
            throw ValidationError("code has more than 27 entries");
        int value = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc{} || ptr != tok.data() + tok.size())
            throw ValidationError("code entry " + std::to_string(count) + " is not an integer: '" +
                                  std::string(tok) + "'");
        raw[static_cast<std::size_t>(count++)] = value;
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    if (count != kCodeDims)
        throw ValidationError("code has " + std::to_string(count) + " entries, expected 27");
    return raw;
}

/// Validate raw integers against the grid and normalize them.
inline ArchCode code_from_raw_ints(const std::array<int, kCodeDims>& raw) {
    std::array<double, kCodeDims> vals{};
    for (int i = 0; i < kCodeDims; ++i) {
        const DimBounds b = bounds(i);
        const int v = raw[static_cast<std::size_t>(i)];
        if (v < b.min || v > b.max || v % static_cast<int>(b.unit) != 0)
            throw ValidationError(std::string("dimension ") + std::to_string(i) + " (" + dim_name(i) +
                                  ") is off the grid: " + std::to_string(v));
        vals[static_cast<std::size_t>(i)] = v;
    }
    return normalize(vals);
}

} // namespace ncp

#endif // NCP_CODING_HPP
