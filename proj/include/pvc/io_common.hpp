#pragma once

// Byte-level helpers shared by the raw and DICOM codecs. All multi-byte
// values are little-endian regardless of host order.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "pvc/errors.hpp"
#include "pvc/volume.hpp"

namespace pvc {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    in.seekg(0, std::ios::end);
    const auto size = std::streamoff(in.tellg());
    in.seekg(0, std::ios::beg);
    Bytes out(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(out.data()), size))
        throw Error("failed reading '" + path + "'");
    return out;
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error("failed writing '" + path + "'");
}

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void i16(std::int16_t v) { put(std::uint16_t(v), 2); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void text(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void zeros(std::size_t n) { buf_.insert(buf_.end(), n, 0); }

    std::size_t size() const noexcept { return buf_.size(); }
    Bytes& buffer() noexcept { return buf_; }
    Bytes take() && { return std::move(buf_); }

private:
    void put(std::uint64_t v, int n) {
        for (int b = 0; b < n; ++b) buf_.push_back(std::uint8_t(v >> (8 * b)));
    }
    Bytes buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string context)
        : data_(data), context_(std::move(context)) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool at_end() const noexcept { return pos_ >= data_.size(); }
    void seek(std::size_t pos) { pos_ = pos; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n)
            throw FormatError(context_ + ": truncated " + what + ": need " + std::to_string(n) + " bytes, " +
                                  std::to_string(remaining()) + " available",
                              pos_);
    }

    std::uint8_t u8(const char* what = "data") { return std::uint8_t(get(1, what)); }
    std::uint16_t u16(const char* what = "data") { return std::uint16_t(get(2, what)); }
    std::uint32_t u32(const char* what = "data") { return std::uint32_t(get(4, what)); }
    double f64(const char* what = "data") { return std::bit_cast<double>(get(8, what)); }

    std::span<const std::uint8_t> bytes(std::size_t n, const char* what = "data") {
        need(n, what);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::string text(std::size_t n, const char* what = "data") {
        auto b = bytes(n, what);
        return std::string(b.begin(), b.end());
    }

    const std::string& context() const noexcept { return context_; }

private:
    std::uint64_t get(int n, const char* what) {
        need(std::size_t(n), what);
        std::uint64_t v = 0;
        for (int b = 0; b < n; ++b) v |= std::uint64_t(data_[pos_ + std::size_t(b)]) << (8 * b);
        pos_ += std::size_t(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string context_;
    std::size_t pos_ = 0;
};

/// HU -> stored integer: round half away from zero, then clamp to [lo, hi].
inline std::int64_t quantize(double hu, const Rescale& r, std::int64_t lo, std::int64_t hi) {
    const double stored = std::round(r.to_stored(hu));
    if (std::isnan(stored)) return 0;
    if (stored <= double(lo)) return lo;
    if (stored >= double(hi)) return hi;
    return std::int64_t(stored);
}

}  // namespace pvc
