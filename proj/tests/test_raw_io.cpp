#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "pvc/raw_io.hpp"
#include "support/temp_dir.hpp"

using namespace pvc;

namespace {

// Hand-laid-out version 1 header, independent of the encoder.
Bytes hand_header(std::uint32_t nx, std::uint32_t ny, std::uint32_t nz, std::uint8_t element, double slope,
                  double intercept) {
    Bytes b;
    auto put = [&](const void* p, std::size_t n) {
        const auto* c = static_cast<const std::uint8_t*>(p);
        b.insert(b.end(), c, c + n);
    };
    put("PVCRAW\0\0", 8);
    const std::uint32_t version = 1;
    put(&version, 4);
    for (std::uint32_t d : {nx, ny, nz}) put(&d, 4);
    for (double s : {0.5, 0.75, 2.0}) put(&s, 8);
    for (double o : {-1.0, 0.0, 10.0}) put(&o, 8);
    for (double a : {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0}) put(&a, 8);
    b.push_back(element);
    b.insert(b.end(), 7, 0);
    put(&slope, 8);
    put(&intercept, 8);
    const std::uint32_t entries = 0;
    put(&entries, 4);
    return b;
}

ScalarVolume random_volume(std::mt19937_64& rng, bool integer) {
    std::uniform_int_distribution<std::size_t> dim(1, 9);
    std::uniform_real_distribution<double> hu(-1024, 3071), sp(0.1, 3);
    const GridGeometry g({dim(rng), dim(rng), dim(rng)}, {sp(rng), sp(rng), sp(rng)}, {hu(rng), hu(rng), hu(rng)});
    std::vector<double> v(g.voxel_count());
    for (auto& x : v) x = integer ? std::round(hu(rng)) : hu(rng);
    return ScalarVolume(g, v, Rescale{}, Metadata{{"source.kind", "random"}, {"note", std::to_string(rng())}});
}

}  // namespace

TEST(RawIo, HeaderSizeMatchesDocumentedLayout) {
    EXPECT_EQ(hand_header(1, 1, 1, 1, 1, 0).size(), RawVolumeHeader::kFixedSize);
}

TEST(RawIo, HandLaidOutFixtureUsesXFastestOrder) {
    Bytes b = hand_header(2, 2, 2, 1, 1.0, -1024.0);
    for (std::int16_t v : {0, 1, 2, 3, 4, 5, 6, 7}) {
        const std::int16_t stored = std::int16_t(100 * v);
        b.push_back(std::uint8_t(stored & 0xFF));
        b.push_back(std::uint8_t(std::uint16_t(stored) >> 8));
    }
    const auto img = decode_raw(b);
    const auto& v = img.volume;
    EXPECT_EQ(v.at(0, 0, 0), -1024.0);
    EXPECT_EQ(v.at(1, 0, 0), -924.0);
    EXPECT_EQ(v.at(0, 1, 0), -824.0);
    EXPECT_EQ(v.at(1, 1, 0), -724.0);
    EXPECT_EQ(v.at(0, 0, 1), -624.0);
    EXPECT_EQ(v.at(1, 1, 1), -324.0);
    EXPECT_EQ(v.geometry().spacing(), (Vec3{0.5, 0.75, 2.0}));
    EXPECT_EQ(v.geometry().origin(), (Vec3{-1.0, 0.0, 10.0}));
    EXPECT_EQ(img.header.element, ElementType::int16);
    EXPECT_EQ(img.header.payload_offset, RawVolumeHeader::kFixedSize);
}

TEST(RawIo, EncoderReproducesHandLaidOutBytes) {
    Bytes b = hand_header(2, 2, 2, 2, 1.0, 0.0);
    const std::vector<double> values{1.5, -2.25, 3, 4, 5, 6, 7, 1e300};
    for (double v : values) {
        std::uint8_t raw[8];
        std::memcpy(raw, &v, 8);
        b.insert(b.end(), raw, raw + 8);
    }
    const GridGeometry g({2, 2, 2}, {0.5, 0.75, 2.0}, {-1.0, 0.0, 10.0});
    EXPECT_EQ(encode_raw(ScalarVolume(g, values), ElementType::float64), b);
}

TEST(RawIo, RoundTripFloat64IsBitExact) {
    std::mt19937_64 rng(41);
    fixture::TempDir dir;
    for (int t = 0; t < 50; ++t) {
        const auto v = random_volume(rng, false);
        write_raw(v, dir / "v.pvcraw");
        const auto back = read_raw_volume(dir / "v.pvcraw");
        ASSERT_TRUE(same_grid(back.geometry(), v.geometry()));
        EXPECT_EQ(back.geometry().origin(), v.geometry().origin());
        EXPECT_EQ(back.geometry().spacing(), v.geometry().spacing());
        EXPECT_EQ(back.metadata(), v.metadata());
        ASSERT_EQ(std::memcmp(back.values().data(), v.values().data(), v.size() * sizeof(double)), 0);
    }
}

TEST(RawIo, RoundTripInt16IsBitExactForStoredValues) {
    std::mt19937_64 rng(42);
    fixture::TempDir dir;
    for (int t = 0; t < 50; ++t) {
        auto v = random_volume(rng, true);
        // Values on the stored grid of slope 0.5, intercept -1024.
        std::vector<double> hu(v.values().begin(), v.values().end());
        for (auto& x : hu) x = 0.5 * std::round(x) - 1024.0;
        const ScalarVolume src(v.geometry(), hu, Rescale{0.5, -1024.0}, v.metadata());
        write_raw(src, dir / "v.pvcraw", ElementType::int16);
        const auto img = read_raw(dir / "v.pvcraw");
        EXPECT_EQ(img.header.element, ElementType::int16);
        EXPECT_EQ(img.volume.rescale(), src.rescale());
        ASSERT_EQ(std::memcmp(img.volume.values().data(), hu.data(), hu.size() * sizeof(double)), 0);
        EXPECT_EQ(encode_raw(img.volume, ElementType::int16), read_file_bytes(dir / "v.pvcraw"));
    }
}

TEST(RawIo, Int16QuantisationRoundsHalfAwayFromZero) {
    const GridGeometry g({4, 1, 1}, {1, 1, 1});
    const ScalarVolume v(g, {2.5, -2.5, 0.49, 1e6}, Rescale{1.0, 0.0});
    const auto back = decode_raw(encode_raw(v, ElementType::int16)).volume;
    EXPECT_EQ(back[0], 3.0);
    EXPECT_EQ(back[1], -3.0);
    EXPECT_EQ(back[2], 0.0);
    EXPECT_EQ(back[3], 32767.0);
    EXPECT_EQ(quantize(-1e9, {}, -32768, 32767), -32768);
}

TEST(RawIo, TruncatedPayloadNamesExpectedAndActualSize) {
    Bytes b = hand_header(2, 2, 2, 1, 1.0, 0.0);
    b.insert(b.end(), 15, 0);
    try {
        decode_raw(b, "t.pvcraw");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("truncated"), std::string::npos) << what;
        EXPECT_NE(what.find("16"), std::string::npos) << what;
        EXPECT_NE(what.find("15"), std::string::npos) << what;
        EXPECT_EQ(e.offset(), RawVolumeHeader::kFixedSize);
    }
    b.insert(b.end(), 2, 0);
    EXPECT_THROW(decode_raw(b), FormatError);
}

TEST(RawIo, TruncatedHeaderReportsOffset) {
    Bytes b = hand_header(2, 2, 2, 1, 1.0, 0.0);
    b.resize(100);
    try {
        decode_raw(b);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 96u);
    }
}

TEST(RawIo, RejectsBadMagicVersionAndElementType) {
    Bytes b = hand_header(1, 1, 1, 1, 1.0, 0.0);
    b.insert(b.end(), 2, 0);
    Bytes bad = b;
    bad[0] = 'X';
    EXPECT_THROW(decode_raw(bad), FormatError);
    bad = b;
    bad[8] = 2;
    try {
        decode_raw(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 8u);
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
    bad = b;
    bad[144] = 9;
    EXPECT_THROW(decode_raw(bad), FormatError);
    bad = hand_header(1, 1, 1, 1, 0.0, 0.0);
    bad.insert(bad.end(), 2, 0);
    EXPECT_THROW(decode_raw(bad), FormatError);
    bad = hand_header(0, 1, 1, 1, 1.0, 0.0);
    EXPECT_THROW(decode_raw(bad), FormatError);
}

TEST(RawIo, MissingFileThrows) { EXPECT_THROW(read_raw("/nonexistent/v.pvcraw"), Error); }

TEST(RawIo, MaskRoundTrip) {
    fixture::TempDir dir;
    const GridGeometry g({5, 4, 3}, {0.488, 0.488, 1.0});
    const auto m = make_mask(g, [](const VoxelIndex& v) { return (v.i + v.j + v.k) % 3 == 0; });
    write_raw_mask(m, dir / "m.pvcraw");
    EXPECT_EQ(read_raw_mask(dir / "m.pvcraw"), m);
    const auto img = read_raw(dir / "m.pvcraw");
    EXPECT_EQ(img.header.element, ElementType::int16);
    for (std::size_t p = 0; p < m.size(); ++p) ASSERT_EQ(img.volume[p], double(m[p]));
}

TEST(RawIo, MaskFromVolumeTreatsNonzeroAsSet) {
    fixture::TempDir dir;
    const GridGeometry g({3, 1, 1}, {1, 1, 1});
    write_raw(ScalarVolume(g, {0.0, 255.0, -1.0}), dir / "m.pvcraw", ElementType::int16);
    const auto m = read_raw_mask(dir / "m.pvcraw");
    EXPECT_EQ(m[0], 0);
    EXPECT_EQ(m[1], 1);
    EXPECT_EQ(m[2], 1);
}
