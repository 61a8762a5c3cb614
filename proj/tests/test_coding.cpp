#include <doctest.h>

#include <set>

#include "ncp/coding.hpp"

using namespace ncp;

TEST_CASE("dimension layout and bounds") {
    CHECK(kCodeDims == 27);
    // i1, i2, o1 and every c are channels; every b and n is a count.
    CHECK(dim_kind(0) == DimKind::Channel);
    CHECK(dim_kind(1) == DimKind::Channel);
    CHECK(dim_kind(2) == DimKind::Count);    // b1
    CHECK(dim_kind(3) == DimKind::Count);    // n1^1
    CHECK(dim_kind(4) == DimKind::Channel);  // c1^1
    CHECK(dim_kind(17) == DimKind::Count);   // b4
    CHECK(dim_kind(26) == DimKind::Channel); // o1

    CHECK(bounds(0).min == 8.0);
    CHECK(bounds(0).max == 128.0);
    CHECK(bounds(0).unit == 8.0);
    CHECK(bounds(2).min == 1.0);
    CHECK(bounds(2).max == 4.0);
    CHECK(bounds(2).unit == 1.0);
    CHECK(bounds(26).min == 8.0);
    CHECK(bounds(26).max == 128.0);

    int channels = 0, counts = 0;
    for (int i = 0; i < kCodeDims; ++i)
        (dim_kind(i) == DimKind::Channel ? channels : counts)++;
    CHECK(channels == 13);  // i1 i2, 10 c, o1
    CHECK(counts == 14);    // 4 b, 10 n

    CHECK_THROWS_AS(bounds(27), ValidationError);
    CHECK_THROWS_AS(bounds(-1), ValidationError);
}

TEST_CASE("normalize is the per-dimension affine map") {
    std::array<double, kCodeDims> raw{};
    for (int i = 0; i < kCodeDims; ++i) raw[i] = dim_kind(i) == DimKind::Count ? 2.0 : 64.0;
    const ArchCode code = normalize(raw);
    CHECK(code[0] == doctest::Approx(56.0 / 120.0));  // channel 64
    CHECK(code[2] == doctest::Approx(1.0 / 3.0));     // count 2

    raw[0] = 8.0;
    CHECK(normalize(raw)[0] == 0.0);
    raw[0] = 128.0;
    CHECK(normalize(raw)[0] == 1.0);

    raw[0] = 130.0;
    CHECK_THROWS_WITH_AS(normalize(raw), doctest::Contains("dimension 0"), ValidationError);
}

TEST_CASE("rounding: nearest unit, ties away from zero, clamped") {
    CHECK(round_raw_dim(0, 61.2) == 64);   // 61.2/8 = 7.65 -> 8
    CHECK(round_raw_dim(0, 59.9) == 56);   // 59.9/8 = 7.4875 -> 7
    CHECK(round_raw_dim(0, 60.0) == 64);   // tie away from zero
    CHECK(round_raw_dim(2, 2.5) == 3);
    CHECK(round_raw_dim(2, 0.2) == 1);     // clamped to lower bound
    CHECK(round_raw_dim(0, 400.0) == 128); // clamped to upper bound

    // Idempotence of round_code.
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        ArchCode code;
        for (int i = 0; i < kCodeDims; ++i) code[i] = rng.uniform(-0.5, 1.5);
        const auto once = round_code(code);
        ArchCode snapped;
        for (int i = 0; i < kCodeDims; ++i) snapped[i] = normalize_dim(i, once[i]);
        CHECK(round_code(snapped) == once);
    }
}

TEST_CASE("round_code of any real vector yields a valid spec") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        ArchCode code;
        for (int i = 0; i < kCodeDims; ++i) code[i] = rng.uniform(-3.0, 3.0);
        const ArchCode clamped = clamp01(code);
        for (int i = 0; i < kCodeDims; ++i) {
            CHECK(clamped[i] >= 0.0);
            CHECK(clamped[i] <= 1.0);
        }
        CHECK_NOTHROW(validate(decode(code)));
    }
}

TEST_CASE("decode lays dimensions out in stage order") {
    const NetworkSpec spec = decode(default_init_code(), Head::Segmentation,
                                    InputGeometry{128, 128, 3, 19});
    CHECK(spec.stem1 == 64);
    CHECK(spec.stem2 == 64);
    CHECK(spec.output_width == 64);
    for (int s = 0; s < 4; ++s) {
        CHECK(spec.stages[s].blocks == 2);
        REQUIRE(static_cast<int>(spec.stages[s].units.size()) == s + 1);
        REQUIRE(static_cast<int>(spec.stages[s].channels.size()) == s + 1);
        for (int j = 0; j <= s; ++j) {
            CHECK(spec.stages[s].units[j] == 2);
            CHECK(spec.stages[s].channels[j] == 64);
        }
    }

    // All-zeros normalized code decodes to the minimal architecture.
    const NetworkSpec minimal = decode(ArchCode{});
    CHECK(minimal.stem1 == 8);
    CHECK(minimal.stages[3].blocks == 1);
    CHECK(minimal.stages[3].channels[3] == 8);
    CHECK(minimal.output_width == 8);
}

TEST_CASE("encode inverts decode") {
    // Extremes.
    ArchCode zeros{};
    CHECK(encode(decode(zeros)) == zeros);
    ArchCode ones;
    for (int i = 0; i < kCodeDims; ++i) ones[i] = 1.0;
    CHECK(encode(decode(ones)) == ones);

    // Property: decode(encode(spec)) == spec over seeded random specs, and
    // encode(decode(code)) == code for on-grid codes.
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const ArchCode code = sample(rng);
        const NetworkSpec spec = decode(code);
        CHECK(encode(spec) == code);
        const NetworkSpec again = decode(encode(spec));
        CHECK(spec_to_raw(again) == spec_to_raw(spec));
    }
}

TEST_CASE("encode validates spec invariants") {
    NetworkSpec spec = decode(default_init_code());
    spec.stages[1].channels[0] = 60;  // not a multiple of 8
    CHECK_THROWS_AS(encode(spec), ValidationError);
    spec = decode(default_init_code());
    spec.stages[2].units.pop_back();
    CHECK_THROWS_AS(encode(spec), ValidationError);
    spec = decode(default_init_code());
    spec.stages[0].blocks = 5;
    CHECK_THROWS_AS(encode(spec), ValidationError);
}

TEST_CASE("sample is deterministic and covers the grid") {
    CHECK(sample(123) == sample(123));
    CHECK(sample(123) != sample(124));

    // Every dimension takes every grid value at least once over 10k draws.
    std::array<std::set<int>, kCodeDims> seen;
    Rng rng(5);
    for (int n = 0; n < 10000; ++n) {
        const auto raw = round_code(sample(rng));
        for (int i = 0; i < kCodeDims; ++i) seen[i].insert(raw[i]);
    }
    for (int i = 0; i < kCodeDims; ++i) {
        const int options = dim_kind(i) == DimKind::Count ? 4 : 16;
        CHECK(static_cast<int>(seen[i].size()) == options);
    }
}

TEST_CASE("canonical text form round-trips") {
    const auto raw = round_code(sample(99));
    CHECK(parse_raw_code(format_raw_code(raw)) == raw);

    const std::string text = "64,64,2,2,64,2,2,2,64,64,2,2,2,2,64,64,64,2,2,2,2,2,64,64,64,64,64";
    CHECK(code_from_raw_ints(parse_raw_code(text)) == default_init_code());

    CHECK_THROWS_AS(parse_raw_code("1,2,3"), ValidationError);
    CHECK_THROWS_AS(parse_raw_code(text + ",8"), ValidationError);
    CHECK_THROWS_AS(parse_raw_code("64,64,2,2,sixty,2,2,2,64,64,2,2,2,2,64,64,64,2,2,2,2,2,64,64,64,64,64"),
                    ValidationError);

    // Off-grid raw ints are rejected with the dimension named.
    auto bad = raw;
    bad[4] = 63;
    CHECK_THROWS_WITH_AS(code_from_raw_ints(bad), doctest::Contains("c1_1"), ValidationError);
}
