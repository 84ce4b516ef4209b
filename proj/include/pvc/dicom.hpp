#pragma once

// Minimal DICOM Part 10 codec: uncompressed little-endian transfer syntaxes
// (implicit and explicit VR), single-frame 16-bit greyscale images.
//
// Files are held as ordered element lists with raw value bytes, so writing a
// parsed file back reproduces every element it does not touch. Nested
// sequences are kept as opaque byte blocks in the file's own encoding.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pvc/errors.hpp"
#include "pvc/io_common.hpp"

namespace pvc::dicom {

constexpr std::uint32_t make_tag(std::uint16_t group, std::uint16_t element) {
    return (std::uint32_t(group) << 16) | element;
}
constexpr std::uint16_t tag_group(std::uint32_t tag) { return std::uint16_t(tag >> 16); }
constexpr std::uint16_t tag_element(std::uint32_t tag) { return std::uint16_t(tag & 0xFFFF); }

namespace tags {
inline constexpr std::uint32_t kFileMetaGroupLength = make_tag(0x0002, 0x0000);
inline constexpr std::uint32_t kFileMetaVersion = make_tag(0x0002, 0x0001);
inline constexpr std::uint32_t kMediaStorageSopClassUid = make_tag(0x0002, 0x0002);
inline constexpr std::uint32_t kMediaStorageSopInstanceUid = make_tag(0x0002, 0x0003);
inline constexpr std::uint32_t kTransferSyntaxUid = make_tag(0x0002, 0x0010);
inline constexpr std::uint32_t kImplementationClassUid = make_tag(0x0002, 0x0012);
inline constexpr std::uint32_t kSopClassUid = make_tag(0x0008, 0x0016);
inline constexpr std::uint32_t kSopInstanceUid = make_tag(0x0008, 0x0018);
inline constexpr std::uint32_t kModality = make_tag(0x0008, 0x0060);
inline constexpr std::uint32_t kDerivationDescription = make_tag(0x0008, 0x2111);
inline constexpr std::uint32_t kSliceThickness = make_tag(0x0018, 0x0050);
inline constexpr std::uint32_t kStudyInstanceUid = make_tag(0x0020, 0x000D);
inline constexpr std::uint32_t kSeriesInstanceUid = make_tag(0x0020, 0x000E);
inline constexpr std::uint32_t kInstanceNumber = make_tag(0x0020, 0x0013);
inline constexpr std::uint32_t kImagePositionPatient = make_tag(0x0020, 0x0032);
inline constexpr std::uint32_t kImageOrientationPatient = make_tag(0x0020, 0x0037);
inline constexpr std::uint32_t kSamplesPerPixel = make_tag(0x0028, 0x0002);
inline constexpr std::uint32_t kNumberOfFrames = make_tag(0x0028, 0x0008);
inline constexpr std::uint32_t kRows = make_tag(0x0028, 0x0010);
inline constexpr std::uint32_t kColumns = make_tag(0x0028, 0x0011);
inline constexpr std::uint32_t kPixelSpacing = make_tag(0x0028, 0x0030);
inline constexpr std::uint32_t kBitsAllocated = make_tag(0x0028, 0x0100);
inline constexpr std::uint32_t kBitsStored = make_tag(0x0028, 0x0101);
inline constexpr std::uint32_t kHighBit = make_tag(0x0028, 0x0102);
inline constexpr std::uint32_t kPixelRepresentation = make_tag(0x0028, 0x0103);
inline constexpr std::uint32_t kRescaleIntercept = make_tag(0x0028, 0x1052);
inline constexpr std::uint32_t kRescaleSlope = make_tag(0x0028, 0x1053);
inline constexpr std::uint32_t kPixelData = make_tag(0x7FE0, 0x0010);

inline constexpr std::uint32_t kItem = make_tag(0xFFFE, 0xE000);
inline constexpr std::uint32_t kItemDelimitation = make_tag(0xFFFE, 0xE00D);
inline constexpr std::uint32_t kSequenceDelimitation = make_tag(0xFFFE, 0xE0DD);
}  // namespace tags

inline constexpr std::string_view kImplicitVrLittleEndian = "1.2.840.10008.1.2";
inline constexpr std::string_view kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";
inline constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFF;

inline std::string tag_string(std::uint32_t tag) {
    static const char* hex = "0123456789ABCDEF";
    std::string s = "(0000,0000)";
    for (int n = 0; n < 4; ++n) {
        s[1 + std::size_t(n)] = hex[(tag_group(tag) >> (12 - 4 * n)) & 0xF];
        s[6 + std::size_t(n)] = hex[(tag_element(tag) >> (12 - 4 * n)) & 0xF];
    }
    return s;
}

/// VR of the attributes this library interprets; everything else is UN
/// when read from an implicit-VR file.
inline std::string dictionary_vr(std::uint32_t tag) {
    using namespace tags;
    switch (tag) {
        case kSopClassUid: case kSopInstanceUid: case kStudyInstanceUid: case kSeriesInstanceUid:
        case kMediaStorageSopClassUid: case kMediaStorageSopInstanceUid: case kTransferSyntaxUid:
        case kImplementationClassUid:
            return "UI";
        case kModality: return "CS";
        case kDerivationDescription: return "ST";
        case kSliceThickness: case kImagePositionPatient: case kImageOrientationPatient: case kPixelSpacing:
        case kRescaleIntercept: case kRescaleSlope:
            return "DS";
        case kInstanceNumber: case kNumberOfFrames: return "IS";
        case kSamplesPerPixel: case kRows: case kColumns: case kBitsAllocated: case kBitsStored: case kHighBit:
        case kPixelRepresentation:
            return "US";
        case kFileMetaGroupLength: return "UL";
        case kFileMetaVersion: return "OB";
        case kPixelData: return "OW";
        default: return "UN";
    }
}

inline bool has_long_length(std::string_view vr) {
    static constexpr std::array<std::string_view, 13> long_vrs{"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                               "SV", "UC", "UN", "UR", "UT", "UV"};
    return std::find(long_vrs.begin(), long_vrs.end(), vr) != long_vrs.end();
}

struct Element {
    std::uint32_t tag = 0;
    std::string vr;
    /// Value bytes. For undefined-length elements this is the encoded item
    /// content, without the closing sequence delimiter.
    Bytes value;
    bool undefined_length = false;
};

class File {
public:
    Bytes preamble = Bytes(128, 0);
    std::vector<Element> meta;
    std::vector<Element> dataset;

    std::string transfer_syntax() const { return text(tags::kTransferSyntaxUid).value_or(""); }
    bool explicit_vr() const { return transfer_syntax() != kImplicitVrLittleEndian; }

    const Element* find(std::uint32_t tag) const {
        const auto& list = tag_group(tag) == 0x0002 ? meta : dataset;
        for (const auto& e : list)
            if (e.tag == tag) return &e;
        return nullptr;
    }

    /// Value as text with trailing padding (space or NUL) removed.
    std::optional<std::string> text(std::uint32_t tag) const {
        const Element* e = find(tag);
        if (!e) return std::nullopt;
        std::string s(e->value.begin(), e->value.end());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
        return s;
    }

    /// Backslash-separated decimal strings (DS/IS).
    std::optional<std::vector<double>> numbers(std::uint32_t tag) const {
        auto s = text(tag);
        if (!s) return std::nullopt;
        std::vector<double> out;
        std::size_t start = 0;
        while (start <= s->size()) {
            const std::size_t end = std::min(s->find('\\', start), s->size());
            std::string part = s->substr(start, end - start);
            part.erase(0, part.find_first_not_of(' '));
            while (!part.empty() && part.back() == ' ') part.pop_back();
            char* stop = nullptr;
            const double v = std::strtod(part.c_str(), &stop);
            if (part.empty() || stop != part.c_str() + part.size())
                throw Error("DICOM tag " + tag_string(tag) + ": '" + *s + "' is not a decimal string");
            out.push_back(v);
            start = end + 1;
        }
        return out;
    }

    std::optional<std::uint16_t> us(std::uint32_t tag) const {
        const Element* e = find(tag);
        if (!e || e->value.size() < 2) return std::nullopt;
        return std::uint16_t(e->value[0] | (e->value[1] << 8));
    }

    /// Inserts or replaces an element, keeping tag order.
    void set(std::uint32_t tag, std::string vr, Bytes value) {
        auto& list = tag_group(tag) == 0x0002 ? meta : dataset;
        auto it = std::lower_bound(list.begin(), list.end(), tag,
                                   [](const Element& e, std::uint32_t t) { return e.tag < t; });
        if (it != list.end() && it->tag == tag) {
            it->value = std::move(value);
            it->undefined_length = false;
            if (it->vr.empty() || it->vr == "UN") it->vr = std::move(vr);
        } else {
            list.insert(it, Element{tag, std::move(vr), std::move(value), false});
        }
    }

    /// Sets a text value, padded to even length (NUL for UI, space otherwise).
    void set_string(std::uint32_t tag, const std::string& vr, std::string s) {
        if (s.size() % 2) s.push_back(vr == "UI" ? '\0' : ' ');
        set(tag, vr, Bytes(s.begin(), s.end()));
    }
};

namespace detail {

struct Header {
    std::uint32_t tag;
    std::string vr;
    std::uint32_t length;
    std::size_t value_offset;
};

inline Header read_header(ByteReader& r, bool explicit_vr) {
    Header h{};
    const std::size_t start = r.offset();
    const std::uint16_t group = r.u16("element header");
    const std::uint16_t element = r.u16("element header");
    h.tag = make_tag(group, element);
    if (group == 0xFFFE) {  // item and delimiter tags never carry a VR
        h.length = r.u32("element header");
    } else if (explicit_vr) {
        h.vr = r.text(2, "element header");
        if (!std::isupper(static_cast<unsigned char>(h.vr[0])) || !std::isupper(static_cast<unsigned char>(h.vr[1])))
            throw FormatError(r.context() + ": invalid VR for tag " + tag_string(h.tag), start + 4);
        if (has_long_length(h.vr)) {
            r.bytes(2, "element header");
            h.length = r.u32("element header");
        } else {
            h.length = r.u16("element header");
        }
    } else {
        h.vr = dictionary_vr(h.tag);
        h.length = r.u32("element header");
    }
    h.value_offset = r.offset();
    return h;
}

void skip_undefined(ByteReader& r, bool explicit_vr, std::uint32_t terminator);

// Skips one item's content or one element's value starting after its header.
inline void skip_value(ByteReader& r, const Header& h, bool explicit_vr) {
    if (h.length != kUndefinedLength) {
        r.bytes(h.length, "element value");
        return;
    }
    // Undefined-length UN content is always implicit VR.
    skip_undefined(r, h.vr == "UN" ? false : explicit_vr, tags::kSequenceDelimitation);
}

// Consumes elements or items until `terminator` (inclusive).
inline void skip_undefined(ByteReader& r, bool explicit_vr, std::uint32_t terminator) {
    for (;;) {
        const std::size_t at = r.offset();
        if (r.at_end()) throw FormatError(r.context() + ": unterminated undefined-length value", at);
        const Header h = read_header(r, explicit_vr);
        if (h.tag == terminator) return;
        if (h.tag == tags::kItem) {
            if (h.length == kUndefinedLength)
                skip_undefined(r, explicit_vr, tags::kItemDelimitation);
            else
                r.bytes(h.length, "sequence item");
        } else {
            skip_value(r, h, explicit_vr);
        }
    }
}

inline Element read_element(ByteReader& r, bool explicit_vr) {
    const std::size_t start = r.offset();
    const Header h = read_header(r, explicit_vr);
    Element e{h.tag, h.vr, {}, false};
    if (h.length == kUndefinedLength) {
        if (h.tag == tags::kPixelData)
            throw FormatError(r.context() + ": encapsulated (compressed) pixel data is not supported", start);
        const std::size_t content = r.offset();
        skip_value(r, h, explicit_vr);
        // Content excludes the 8-byte sequence delimitation item.
        const std::size_t end = r.offset() - 8;
        r.seek(content);
        auto bytes = r.bytes(end - content);
        e.value.assign(bytes.begin(), bytes.end());
        r.bytes(8);
        e.undefined_length = true;
    } else {
        auto bytes = r.bytes(h.length, "element value");
        e.value.assign(bytes.begin(), bytes.end());
    }
    return e;
}

inline void write_element(ByteWriter& w, const Element& e, bool explicit_vr) {
    w.u16(tag_group(e.tag));
    w.u16(tag_element(e.tag));
    const std::uint32_t length = e.undefined_length ? kUndefinedLength : std::uint32_t(e.value.size());
    if (explicit_vr) {
        const std::string vr = e.vr.size() == 2 ? e.vr : "UN";
        w.text(vr);
        if (has_long_length(vr)) {
            w.zeros(2);
            w.u32(length);
        } else {
            if (e.value.size() > 0xFFFF) throw Error("DICOM tag " + tag_string(e.tag) + " value too long for VR " + vr);
            w.u16(std::uint16_t(length));
        }
    } else {
        w.u32(length);
    }
    w.bytes(e.value);
    if (e.undefined_length) {
        w.u16(0xFFFE);
        w.u16(0xE0DD);
        w.u32(0);
    }
}

}  // namespace detail

inline File parse(std::span<const std::uint8_t> bytes, const std::string& context) {
    ByteReader r(bytes, context);
    File f;
    auto pre = r.bytes(128, "preamble");
    f.preamble.assign(pre.begin(), pre.end());
    if (r.text(4, "preamble") != "DICM") throw FormatError(context + ": missing DICM prefix", 128);

    while (r.remaining() >= 2) {
        const std::size_t at = r.offset();
        if (r.u16() != 0x0002) {
            r.seek(at);
            break;
        }
        r.seek(at);
        f.meta.push_back(detail::read_element(r, true));
    }
    const std::string ts = f.transfer_syntax();
    if (ts.empty()) throw MissingTagError("TransferSyntaxUID (0002,0010)", context);
    if (ts != kImplicitVrLittleEndian && ts != kExplicitVrLittleEndian)
        throw FormatError(context + ": unsupported transfer syntax " + ts, 128);
    const bool explicit_vr = f.explicit_vr();
    while (!r.at_end()) f.dataset.push_back(detail::read_element(r, explicit_vr));
    return f;
}

inline File read_file(const std::string& path) { return parse(read_file_bytes(path), path); }

/// True when the bytes carry the Part 10 "DICM" prefix.
inline bool looks_like_dicom(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 132 && bytes[128] == 'D' && bytes[129] == 'I' && bytes[130] == 'C' && bytes[131] == 'M';
}

/// Encodes the file, recomputing the meta group length.
inline Bytes encode(const File& f) {
    ByteWriter meta;
    for (const auto& e : f.meta)
        if (e.tag != tags::kFileMetaGroupLength) detail::write_element(meta, e, true);

    ByteWriter w;
    w.bytes(f.preamble);
    w.text("DICM");
    w.u16(0x0002);
    w.u16(0x0000);
    w.text("UL");
    w.u16(4);
    w.u32(std::uint32_t(meta.size()));
    w.bytes(meta.buffer());
    const bool explicit_vr = f.explicit_vr();
    for (const auto& e : f.dataset) detail::write_element(w, e, explicit_vr);
    return std::move(w).take();
}

inline void write_file(const File& f, const std::string& path) { write_file_bytes(path, encode(f)); }

/// Deterministic UID under the 2.25 (UUID-derived) root, unique per input
/// string: two independent 64-bit FNV-1a hashes form a 128-bit integer.
inline std::string derive_uid(const std::string& seed) {
    auto fnv = [&](std::uint64_t basis) {
        std::uint64_t h = basis;
        for (unsigned char c : seed) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    };
    // Base-10 conversion of the 128-bit value held as four 32-bit limbs.
    const std::uint64_t hi = fnv(0xcbf29ce484222325ULL), lo = fnv(0x84222325cbf29ce4ULL);
    std::uint32_t limbs[4] = {std::uint32_t(hi >> 32), std::uint32_t(hi), std::uint32_t(lo >> 32),
                              std::uint32_t(lo)};
    std::string digits;
    auto nonzero = [&] { return limbs[0] | limbs[1] | limbs[2] | limbs[3]; };
    do {
        std::uint64_t rem = 0;
        for (auto& limb : limbs) {
            const std::uint64_t cur = (rem << 32) | limb;
            limb = std::uint32_t(cur / 10);
            rem = cur % 10;
        }
        digits.push_back(char('0' + int(rem)));
    } while (nonzero());
    std::reverse(digits.begin(), digits.end());
    return "2.25." + digits;
}

}  // namespace pvc::dicom
