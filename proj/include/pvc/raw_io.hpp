#pragma once

// Raw volume format, version 1. Little-endian throughout.
//
//   offset  size  field
//        0     8  magic "PVCRAW\0\0"
//        8     4  u32 version (= 1)
//       12    12  u32 nx, ny, nz
//       24    24  f64 spacing x, y, z (mm)
//       48    24  f64 origin x, y, z (mm)
//       72    72  f64 axis directions, 3 rows of 3 (x axis first)
//      144     1  u8 element type: 1 = int16, 2 = float64
//      145     7  reserved, zero
//      152     8  f64 rescale slope
//      160     8  f64 rescale intercept
//      168     4  u32 metadata entry count
//      172     .  entries: u32 key length, key bytes, u32 value length, value bytes
//        .     .  payload: nx*ny*nz elements, x fastest, then y, then z
//
// HU = slope * stored + intercept for both element types. float64 files are
// always written with slope 1, intercept 0 so values round-trip exactly.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pvc/errors.hpp"
#include "pvc/io_common.hpp"
#include "pvc/volume.hpp"

namespace pvc {

enum class ElementType : std::uint8_t { int16 = 1, float64 = 2 };

inline std::size_t element_size(ElementType t) { return t == ElementType::int16 ? 2 : 8; }
inline const char* to_string(ElementType t) { return t == ElementType::int16 ? "int16" : "float64"; }

struct RawVolumeHeader {
    static constexpr std::array<char, 8> kMagic{'P', 'V', 'C', 'R', 'A', 'W', '\0', '\0'};
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kFixedSize = 172;

    std::uint32_t version = kVersion;
    GridGeometry geometry{{1, 1, 1}, {1, 1, 1}};
    ElementType element = ElementType::int16;
    Rescale rescale;
    Metadata metadata;
    std::size_t payload_offset = 0;  // filled in by the reader
};

struct RawImage {
    RawVolumeHeader header;
    ScalarVolume volume;
};

namespace detail {

inline RawVolumeHeader parse_raw_header(ByteReader& r) {
    RawVolumeHeader h;
    const std::string magic = r.text(8, "header");
    if (!std::equal(magic.begin(), magic.end(), RawVolumeHeader::kMagic.begin()))
        throw FormatError(r.context() + ": bad magic, not a raw volume file", 0);
    h.version = r.u32("header");
    if (h.version != RawVolumeHeader::kVersion)
        throw FormatError(r.context() + ": unsupported version " + std::to_string(h.version), 8);
    Dims dims{};
    for (auto& d : dims) d = r.u32("header");
    Vec3 spacing{}, origin{};
    std::array<Vec3, 3> axes{};
    for (auto& s : spacing) s = r.f64("header");
    for (auto& o : origin) o = r.f64("header");
    for (auto& axis : axes)
        for (auto& c : axis) c = r.f64("header");
    const std::uint8_t element = r.u8("header");
    if (element != std::uint8_t(ElementType::int16) && element != std::uint8_t(ElementType::float64))
        throw FormatError(r.context() + ": unknown element type " + std::to_string(element), 144);
    h.element = ElementType(element);
    r.bytes(7, "header");
    h.rescale.slope = r.f64("header");
    h.rescale.intercept = r.f64("header");
    if (h.rescale.slope == 0.0 || !std::isfinite(h.rescale.slope))
        throw FormatError(r.context() + ": rescale slope must be finite and non-zero", 152);
    try {
        h.geometry = GridGeometry(dims, spacing, origin, axes);
    } catch (const GeometryError& e) {
        throw FormatError(r.context() + ": invalid geometry: " + e.what(), 12);
    }
    const std::uint32_t entries = r.u32("metadata");
    for (std::uint32_t e = 0; e < entries; ++e) {
        const std::string key = r.text(r.u32("metadata"), "metadata");
        h.metadata[key] = r.text(r.u32("metadata"), "metadata");
    }
    h.payload_offset = r.offset();
    return h;
}

inline Bytes encode_raw(const GridGeometry& g, ElementType element, const Rescale& rescale, const Metadata& metadata,
                        std::span<const double> hu) {
    ByteWriter w;
    for (char c : RawVolumeHeader::kMagic) w.u8(std::uint8_t(c));
    w.u32(RawVolumeHeader::kVersion);
    for (auto d : g.dims()) {
        if (d > std::numeric_limits<std::uint32_t>::max()) throw GeometryError("dimension too large for raw format");
        w.u32(std::uint32_t(d));
    }
    for (double s : g.spacing()) w.f64(s);
    for (double o : g.origin()) w.f64(o);
    for (const auto& axis : g.axes())
        for (double c : axis) w.f64(c);
    w.u8(std::uint8_t(element));
    w.zeros(7);
    const Rescale stored_rescale = element == ElementType::float64 ? Rescale{} : rescale;
    w.f64(stored_rescale.slope);
    w.f64(stored_rescale.intercept);
    w.u32(std::uint32_t(metadata.size()));
    for (const auto& [k, v] : metadata) {
        w.u32(std::uint32_t(k.size()));
        w.text(k);
        w.u32(std::uint32_t(v.size()));
        w.text(v);
    }
    w.buffer().reserve(w.size() + hu.size() * element_size(element));
    if (element == ElementType::int16) {
        for (double v : hu)
            w.i16(std::int16_t(quantize(v, rescale, std::numeric_limits<std::int16_t>::min(),
                                        std::numeric_limits<std::int16_t>::max())));
    } else {
        for (double v : hu) w.f64(v);
    }
    return std::move(w).take();
}

}  // namespace detail

/// Parses a raw volume held in memory. `context` names the source in errors.
inline RawImage decode_raw(std::span<const std::uint8_t> bytes, const std::string& context = "raw volume") {
    ByteReader r(bytes, context);
    RawVolumeHeader h = detail::parse_raw_header(r);
    const std::size_t count = h.geometry.voxel_count();
    const std::size_t expected = count * element_size(h.element);
    if (r.remaining() != expected)
        throw FormatError(context + ": " + (r.remaining() < expected ? "truncated" : "oversized") +
                              " payload: expected " + std::to_string(expected) + " bytes, found " +
                              std::to_string(r.remaining()),
                          r.offset());
    std::vector<double> values(count);
    if (h.element == ElementType::int16) {
        for (auto& v : values) v = h.rescale.to_hu(double(std::int16_t(r.u16())));
    } else {
        for (auto& v : values) v = h.rescale.to_hu(r.f64());
    }
    ScalarVolume vol(h.geometry, std::move(values), h.rescale, h.metadata);
    return {std::move(h), std::move(vol)};
}

inline RawImage read_raw(const std::string& path) { return decode_raw(read_file_bytes(path), path); }

inline ScalarVolume read_raw_volume(const std::string& path) { return read_raw(path).volume; }

/// Reads a raw file as a mask: any nonzero stored value is set.
inline BinaryMask read_raw_mask(const std::string& path) {
    const RawImage img = read_raw(path);
    const auto hu = img.volume.values();
    std::vector<std::uint8_t> bits(hu.size());
    for (std::size_t p = 0; p < hu.size(); ++p) bits[p] = img.volume.rescale().to_stored(hu[p]) != 0.0;
    return BinaryMask(img.volume.geometry(), std::move(bits));
}

inline Bytes encode_raw(const ScalarVolume& v, ElementType element) {
    return detail::encode_raw(v.geometry(), element, v.rescale(), v.metadata(), v.values());
}

/// Writes `v`. int16 output quantises HU under the volume's rescale.
inline void write_raw(const ScalarVolume& v, const std::string& path, ElementType element = ElementType::float64) {
    write_file_bytes(path, encode_raw(v, element));
}

/// Masks are stored as int16 {0, 1} with identity rescale.
inline void write_raw_mask(const BinaryMask& m, const std::string& path) {
    std::vector<double> values(m.data().begin(), m.data().end());
    write_file_bytes(path, detail::encode_raw(m.geometry(), ElementType::int16, Rescale{}, {}, values));
}

}  // namespace pvc
