#pragma once

// DICOM series <-> ScalarVolume.
//
// Required per-slice attributes: Rows, Columns, PixelSpacing,
// ImagePositionPatient, ImageOrientationPatient, RescaleSlope,
// RescaleIntercept, BitsAllocated (= 16), PixelRepresentation, PixelData.
// Slices are ordered by the projection of their position onto the slice
// normal; file names and instance numbers are ignored.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "pvc/dicom.hpp"
#include "pvc/errors.hpp"
#include "pvc/io_common.hpp"
#include "pvc/volume.hpp"

namespace pvc {

inline constexpr double kSliceSpacingTolerance = 1e-3;  // mm
inline constexpr double kOrientationTolerance = 1e-4;

struct DicomSlice {
    std::string path;
    Vec3 position{};
    double normal_offset = 0.0;  // position projected on the slice normal, mm
    Rescale rescale;
    bool is_signed = false;
};

struct DicomSeriesRef {
    std::string directory;
    std::size_t rows = 0;
    std::size_t columns = 0;
    double row_spacing = 0.0;     // mm between rows (PixelSpacing[0])
    double column_spacing = 0.0;  // mm between columns (PixelSpacing[1])
    Vec3 row_direction{1, 0, 0};  // direction of increasing column index
    Vec3 column_direction{0, 1, 0};
    Vec3 normal{0, 0, 1};
    double slice_spacing = 0.0;
    std::vector<DicomSlice> slices;  // sorted along the normal

    GridGeometry geometry() const {
        return GridGeometry({columns, rows, slices.size()}, {column_spacing, row_spacing, slice_spacing},
                            slices.front().position, {row_direction, column_direction, normal});
    }
};

namespace detail {

inline std::vector<double> require_numbers(const dicom::File& f, std::uint32_t tag, const char* name,
                                           std::size_t count, const std::string& path) {
    auto v = f.numbers(tag);
    if (!v) throw MissingTagError(std::string(name) + " " + dicom::tag_string(tag), path);
    if (v->size() != count)
        throw FormatError(path + ": " + name + " has " + std::to_string(v->size()) + " values, expected " +
                              std::to_string(count),
                          0);
    return *v;
}

inline std::uint16_t require_us(const dicom::File& f, std::uint32_t tag, const char* name, const std::string& path) {
    auto v = f.us(tag);
    if (!v) throw MissingTagError(std::string(name) + " " + dicom::tag_string(tag), path);
    return *v;
}

inline Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(dot(v, v));
    if (!(n > 0.0)) throw GeometryError("zero-length orientation vector");
    for (auto& c : v) c /= n;
    return v;
}

struct SliceHeader {
    DicomSlice slice;
    std::size_t rows, columns;
    double row_spacing, column_spacing;
    Vec3 row_dir, col_dir;
};

inline SliceHeader read_slice_header(const dicom::File& f, const std::string& path) {
    using namespace dicom::tags;
    SliceHeader h{};
    h.slice.path = path;
    h.rows = require_us(f, kRows, "Rows", path);
    h.columns = require_us(f, kColumns, "Columns", path);
    if (require_us(f, kBitsAllocated, "BitsAllocated", path) != 16)
        throw FormatError(path + ": only 16-bit pixel data is supported", 0);
    h.slice.is_signed = require_us(f, kPixelRepresentation, "PixelRepresentation", path) == 1;
    if (auto spp = f.us(kSamplesPerPixel); spp && *spp != 1)
        throw FormatError(path + ": only single-sample (greyscale) images are supported", 0);
    if (auto frames = f.numbers(kNumberOfFrames); frames && !frames->empty() && frames->front() > 1)
        throw FormatError(path + ": multi-frame images are not supported", 0);
    const auto spacing = require_numbers(f, kPixelSpacing, "PixelSpacing", 2, path);
    h.row_spacing = spacing[0];
    h.column_spacing = spacing[1];
    const auto pos = require_numbers(f, kImagePositionPatient, "ImagePositionPatient", 3, path);
    h.slice.position = {pos[0], pos[1], pos[2]};
    const auto iop = require_numbers(f, kImageOrientationPatient, "ImageOrientationPatient", 6, path);
    h.row_dir = {iop[0], iop[1], iop[2]};
    h.col_dir = {iop[3], iop[4], iop[5]};
    h.slice.rescale.slope = require_numbers(f, kRescaleSlope, "RescaleSlope", 1, path)[0];
    h.slice.rescale.intercept = require_numbers(f, kRescaleIntercept, "RescaleIntercept", 1, path)[0];
    if (h.slice.rescale.slope == 0.0) throw FormatError(path + ": RescaleSlope is zero", 0);
    if (!f.find(kPixelData)) throw MissingTagError("PixelData " + dicom::tag_string(kPixelData), path);
    return h;
}

inline const dicom::Element& pixel_element(const dicom::File& f, std::size_t expected, const std::string& path) {
    const dicom::Element* px = f.find(dicom::tags::kPixelData);
    if (!px) throw MissingTagError("PixelData " + dicom::tag_string(dicom::tags::kPixelData), path);
    if (px->value.size() < expected)
        throw FormatError(path + ": pixel data holds " + std::to_string(px->value.size()) + " bytes, expected " +
                              std::to_string(expected),
                          0);
    return *px;
}

}  // namespace detail

/// Scans `directory` for DICOM files (anything with the DICM prefix) and
/// validates that they form one regular slice stack.
inline DicomSeriesRef scan_dicom_series(const std::string& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) throw Error("'" + directory + "' is not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(directory))
        if (entry.is_regular_file()) paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());

    DicomSeriesRef ref;
    ref.directory = directory;
    std::vector<detail::SliceHeader> headers;
    for (const auto& path : paths) {
        const Bytes bytes = read_file_bytes(path);
        if (!dicom::looks_like_dicom(bytes)) continue;
        headers.push_back(detail::read_slice_header(dicom::parse(bytes, path), path));
    }
    if (headers.empty()) throw Error("no DICOM files found in '" + directory + "'");

    const auto& first = headers.front();
    ref.rows = first.rows;
    ref.columns = first.columns;
    ref.row_spacing = first.row_spacing;
    ref.column_spacing = first.column_spacing;
    if (!(ref.row_spacing > 0.0) || !(ref.column_spacing > 0.0))
        throw GeometryError(first.slice.path + ": PixelSpacing must be positive");

    const Vec3 row = detail::normalized(first.row_dir);
    const Vec3 first_col = detail::normalized(first.col_dir);
    Vec3 col = first_col;
    if (std::abs(dot(row, col)) > kOrientationTolerance)
        throw GeometryError(first.slice.path + ": ImageOrientationPatient axes are not orthogonal");
    // Gram-Schmidt so the grid axes are orthonormal to machine precision.
    const double proj = dot(row, col);
    for (int c = 0; c < 3; ++c) col[c] -= proj * row[c];
    col = detail::normalized(col);
    ref.row_direction = row;
    ref.column_direction = col;
    ref.normal = cross(row, col);

    for (const auto& h : headers) {
        const std::string& p = h.slice.path;
        if (h.rows != ref.rows || h.columns != ref.columns)
            throw GeometryError(p + ": image size differs from the rest of the series");
        if (std::abs(h.row_spacing - ref.row_spacing) > kSpacingTolerance ||
            std::abs(h.column_spacing - ref.column_spacing) > kSpacingTolerance)
            throw GeometryError(p + ": pixel spacing differs from the rest of the series");
        const Vec3 r = detail::normalized(h.row_dir), c = detail::normalized(h.col_dir);
        for (int a = 0; a < 3; ++a)
            if (std::abs(r[a] - row[a]) > kOrientationTolerance || std::abs(c[a] - first_col[a]) > kOrientationTolerance)
                throw GeometryError(p + ": orientation differs from the rest of the series");
        DicomSlice s = h.slice;
        s.normal_offset = dot(s.position, ref.normal);
        ref.slices.push_back(s);
    }
    std::stable_sort(ref.slices.begin(), ref.slices.end(),
                     [](const DicomSlice& a, const DicomSlice& b) { return a.normal_offset < b.normal_offset; });

    const std::size_t n = ref.slices.size();
    if (n == 1) {
        const dicom::File f = dicom::read_file(ref.slices.front().path);
        const auto thickness = f.numbers(dicom::tags::kSliceThickness);
        ref.slice_spacing = thickness && !thickness->empty() && thickness->front() > 0.0 ? thickness->front() : 1.0;
        return ref;
    }
    ref.slice_spacing = (ref.slices.back().normal_offset - ref.slices.front().normal_offset) / double(n - 1);
    if (!(ref.slice_spacing > 0.0)) throw GeometryError(directory + ": slices share one position");
    for (std::size_t k = 1; k < n; ++k) {
        const double gap = ref.slices[k].normal_offset - ref.slices[k - 1].normal_offset;
        if (std::abs(gap - ref.slice_spacing) > kSliceSpacingTolerance)
            throw GeometryError(directory + ": non-uniform slice spacing (" + std::to_string(gap) + " mm between " +
                                ref.slices[k - 1].path + " and " + ref.slices[k].path + ", expected " +
                                std::to_string(ref.slice_spacing) + " mm)");
    }
    return ref;
}

/// Loads the series as HU, applying each slice's own rescale.
inline ScalarVolume read_dicom_series(const DicomSeriesRef& ref) {
    const GridGeometry g = ref.geometry();
    const std::size_t plane = ref.rows * ref.columns;
    std::vector<double> values(g.voxel_count());
    Metadata meta;
    for (std::size_t k = 0; k < ref.slices.size(); ++k) {
        const DicomSlice& s = ref.slices[k];
        const dicom::File f = dicom::read_file(s.path);
        const auto& px = detail::pixel_element(f, plane * 2, s.path);
        for (std::size_t p = 0; p < plane; ++p) {
            const auto raw = std::uint16_t(px.value[2 * p] | (px.value[2 * p + 1] << 8));
            const double stored = s.is_signed ? double(std::int16_t(raw)) : double(raw);
            values[k * plane + p] = s.rescale.to_hu(stored);
        }
        if (k == 0) {
            meta["source.format"] = "dicom";
            meta["source.path"] = ref.directory;
            if (auto v = f.text(dicom::tags::kSeriesInstanceUid)) meta["dicom.series_instance_uid"] = *v;
            if (auto v = f.text(dicom::tags::kStudyInstanceUid)) meta["dicom.study_instance_uid"] = *v;
            if (auto v = f.text(dicom::tags::kModality)) meta["dicom.modality"] = *v;
        }
    }
    return ScalarVolume(g, std::move(values), ref.slices.front().rescale, std::move(meta));
}

inline ScalarVolume read_dicom_series(const std::string& directory) {
    return read_dicom_series(scan_dicom_series(directory));
}

/// Reads a mask series: any nonzero stored value is set.
inline BinaryMask read_dicom_mask(const DicomSeriesRef& ref) {
    const ScalarVolume v = read_dicom_series(ref);
    const std::size_t plane = ref.rows * ref.columns;
    std::vector<std::uint8_t> bits(v.size());
    for (std::size_t p = 0; p < v.size(); ++p) bits[p] = ref.slices[p / plane].rescale.to_stored(v[p]) != 0.0;
    return BinaryMask(v.geometry(), std::move(bits));
}

struct DicomWriteOptions {
    std::string derivation = "Partial volume corrected at segmented bone surface";
    /// Mixed into derived UIDs so different processing of the same source
    /// yields different instances.
    std::string uid_salt = "pvc";
};

/// Writes `v` as a copy of `templ`: every non-pixel attribute is copied,
/// pixel data is re-quantised under each slice's rescale (round half away
/// from zero, clamped to the 16-bit stored range), SOP instance and series
/// UIDs are replaced with values derived from the originals, and a
/// derivation description is added. Files keep their template names.
inline std::vector<std::string> write_dicom_series(const ScalarVolume& v, const DicomSeriesRef& templ,
                                                   const std::string& out_dir, const DicomWriteOptions& opts = {}) {
    namespace fs = std::filesystem;
    const GridGeometry tg = templ.geometry();
    if (v.geometry().dims() != tg.dims())
        throw AlignmentError("write_dicom_series: volume dimensions do not match the template series");
    fs::create_directories(out_dir);
    if (fs::equivalent(out_dir, templ.directory))
        throw Error("write_dicom_series: output directory must differ from the template series directory");

    const std::size_t plane = templ.rows * templ.columns;
    std::vector<std::string> written;
    for (std::size_t k = 0; k < templ.slices.size(); ++k) {
        const DicomSlice& s = templ.slices[k];
        dicom::File f = dicom::read_file(s.path);
        const dicom::Element& px = detail::pixel_element(f, plane * 2, s.path);
        Bytes pixels = px.value;  // keeps any trailing padding byte
        const std::int64_t lo = s.is_signed ? std::numeric_limits<std::int16_t>::min() : 0;
        const std::int64_t hi = s.is_signed ? std::numeric_limits<std::int16_t>::max()
                                            : std::numeric_limits<std::uint16_t>::max();
        for (std::size_t p = 0; p < plane; ++p) {
            const auto stored = std::uint16_t(quantize(v[k * plane + p], s.rescale, lo, hi));
            pixels[2 * p] = std::uint8_t(stored & 0xFF);
            pixels[2 * p + 1] = std::uint8_t(stored >> 8);
        }
        f.set(dicom::tags::kPixelData, px.vr.empty() ? "OW" : px.vr, std::move(pixels));

        const std::string old_sop = f.text(dicom::tags::kSopInstanceUid).value_or(s.path);
        const std::string old_series = f.text(dicom::tags::kSeriesInstanceUid).value_or(templ.directory);
        const std::string sop = dicom::derive_uid(opts.uid_salt + ":sop:" + old_sop);
        f.set_string(dicom::tags::kSopInstanceUid, "UI", sop);
        f.set_string(dicom::tags::kMediaStorageSopInstanceUid, "UI", sop);
        f.set_string(dicom::tags::kSeriesInstanceUid, "UI", dicom::derive_uid(opts.uid_salt + ":series:" + old_series));
        f.set_string(dicom::tags::kDerivationDescription, "ST", opts.derivation);

        const std::string out = (fs::path(out_dir) / fs::path(s.path).filename()).string();
        dicom::write_file(f, out);
        written.push_back(out);
    }
    return written;
}

}  // namespace pvc
