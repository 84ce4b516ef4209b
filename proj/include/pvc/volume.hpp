#pragma once

// Voxel-grid data model: grid geometry, scalar HU volumes, binary masks and
// the index/distance arithmetic the correction kernel is built on.
//
// Storage order is x-fastest: linear = i + nx * (j + ny * k).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pvc/errors.hpp"

namespace pvc {

using Vec3 = std::array<double, 3>;
using Dims = std::array<std::size_t, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

struct VoxelIndex {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t k = 0;

    friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
    friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Placement of a voxel lattice in world (patient) coordinates, in mm.
///
/// `axes[a]` is the unit direction of increasing index along axis a. The
/// orientation is carried for I/O; distances only use the spacing, which is
/// exact for orthonormal axes.
class GridGeometry {
public:
    static constexpr double kOrthonormalTolerance = 1e-9;

    GridGeometry(Dims dims, Vec3 spacing, Vec3 origin = {0.0, 0.0, 0.0},
                 std::array<Vec3, 3> axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}})
        : dims_(dims), spacing_(spacing), origin_(origin), axes_(axes) {
        for (int a = 0; a < 3; ++a) {
            if (dims_[a] < 1) throw GeometryError("grid dimension " + std::to_string(a) + " is zero");
            if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
                throw GeometryError("grid spacing along axis " + std::to_string(a) + " must be positive");
        }
        for (int a = 0; a < 3; ++a) {
            if (std::abs(dot(axes_[a], axes_[a]) - 1.0) > kOrthonormalTolerance)
                throw GeometryError("orientation axis " + std::to_string(a) + " is not unit length");
            for (int b = a + 1; b < 3; ++b)
                if (std::abs(dot(axes_[a], axes_[b])) > kOrthonormalTolerance)
                    throw GeometryError("orientation axes are not mutually orthogonal");
        }
    }

    const Dims& dims() const noexcept { return dims_; }
    const Vec3& spacing() const noexcept { return spacing_; }
    const Vec3& origin() const noexcept { return origin_; }
    const std::array<Vec3, 3>& axes() const noexcept { return axes_; }

    std::size_t nx() const noexcept { return dims_[0]; }
    std::size_t ny() const noexcept { return dims_[1]; }
    std::size_t nz() const noexcept { return dims_[2]; }
    std::size_t voxel_count() const noexcept { return dims_[0] * dims_[1] * dims_[2]; }

    bool contains(const VoxelIndex& v) const noexcept {
        return v.i < dims_[0] && v.j < dims_[1] && v.k < dims_[2];
    }

    void require_contains(const VoxelIndex& v) const {
        if (!contains(v))
            throw BoundsError("voxel (" + std::to_string(v.i) + "," + std::to_string(v.j) + "," +
                              std::to_string(v.k) + ") outside grid " + std::to_string(dims_[0]) + "x" +
                              std::to_string(dims_[1]) + "x" + std::to_string(dims_[2]));
    }

    std::size_t linear(const VoxelIndex& v) const noexcept { return v.i + dims_[0] * (v.j + dims_[1] * v.k); }

    VoxelIndex index_of(std::size_t linear) const noexcept {
        const std::size_t i = linear % dims_[0];
        const std::size_t rest = linear / dims_[0];
        return {i, rest % dims_[1], rest / dims_[1]};
    }

    /// World position of a voxel centre.
    Vec3 world_position(const VoxelIndex& v) const noexcept {
        const double idx[3] = {double(v.i), double(v.j), double(v.k)};
        Vec3 p = origin_;
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) p[c] += idx[a] * spacing_[a] * axes_[a][c];
        return p;
    }

private:
    Dims dims_;
    Vec3 spacing_;
    Vec3 origin_;
    std::array<Vec3, 3> axes_;
};

inline constexpr double kSpacingTolerance = 1e-6;  // mm
inline constexpr double kOriginTolerance = 1e-3;   // mm

/// True when two geometries index the same voxels: equal dims, spacing
/// within 1e-6 mm and origin within 1e-3 mm.
inline bool same_grid(const GridGeometry& a, const GridGeometry& b) noexcept {
    if (a.dims() != b.dims()) return false;
    for (int c = 0; c < 3; ++c) {
        if (std::abs(a.spacing()[c] - b.spacing()[c]) > kSpacingTolerance) return false;
        if (std::abs(a.origin()[c] - b.origin()[c]) > kOriginTolerance) return false;
    }
    return true;
}

inline void require_aligned(const GridGeometry& a, const GridGeometry& b, const std::string& what) {
    if (a.dims() != b.dims())
        throw AlignmentError(what + ": dimensions differ (" + std::to_string(a.nx()) + "x" + std::to_string(a.ny()) +
                             "x" + std::to_string(a.nz()) + " vs " + std::to_string(b.nx()) + "x" +
                             std::to_string(b.ny()) + "x" + std::to_string(b.nz()) + ")");
    if (!same_grid(a, b)) throw AlignmentError(what + ": spacing or origin differ");
}

/// Dense, immutable voxel array bound to a geometry.
template <class T>
class VoxelGrid {
public:
    using value_type = T;

    VoxelGrid(GridGeometry geometry, std::vector<T> data) : geometry_(std::move(geometry)), data_(std::move(data)) {
        if (data_.size() != geometry_.voxel_count())
            throw GeometryError("voxel array holds " + std::to_string(data_.size()) + " values, grid needs " +
                                std::to_string(geometry_.voxel_count()));
    }

    VoxelGrid(GridGeometry geometry, T fill)
        : geometry_(std::move(geometry)), data_(geometry_.voxel_count(), fill) {}

    const GridGeometry& geometry() const noexcept { return geometry_; }
    std::span<const T> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    const T& operator[](std::size_t linear) const noexcept { return data_[linear]; }
    const T& at(const VoxelIndex& v) const {
        geometry_.require_contains(v);
        return data_[geometry_.linear(v)];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const { return at(VoxelIndex{i, j, k}); }

    /// Moves the storage out, leaving this grid empty. Used to build a
    /// derived grid without copying.
    std::vector<T> release() && { return std::move(data_); }

private:
    GridGeometry geometry_;
    std::vector<T> data_;
};

/// Maps stored integers to HU: hu = slope * stored + intercept.
struct Rescale {
    double slope = 1.0;
    double intercept = 0.0;

    double to_hu(double stored) const noexcept { return slope * stored + intercept; }
    double to_stored(double hu) const noexcept { return (hu - intercept) / slope; }

    friend bool operator==(const Rescale&, const Rescale&) = default;
};

using Metadata = std::map<std::string, std::string>;

/// HU volume. Values are real HU; `rescale` describes how they map back to
/// the stored integers of the source file, and is used only when writing.
class ScalarVolume : public VoxelGrid<double> {
public:
    ScalarVolume(GridGeometry geometry, std::vector<double> values, Rescale rescale = {}, Metadata metadata = {})
        : VoxelGrid<double>(std::move(geometry), std::move(values)),
          rescale_(rescale),
          metadata_(std::move(metadata)) {
        if (rescale_.slope == 0.0 || !std::isfinite(rescale_.slope))
            throw DomainError("rescale slope must be finite and non-zero");
    }

    ScalarVolume(GridGeometry geometry, double fill) : ScalarVolume(geometry, std::vector<double>(geometry.voxel_count(), fill)) {}

    const Rescale& rescale() const noexcept { return rescale_; }
    const Metadata& metadata() const noexcept { return metadata_; }
    std::span<const double> values() const noexcept { return data(); }

    /// Same geometry, rescale and metadata with new voxel values.
    ScalarVolume with_values(std::vector<double> values) const {
        return ScalarVolume(geometry(), std::move(values), rescale_, metadata_);
    }

    ScalarVolume with_metadata(Metadata metadata) const {
        return ScalarVolume(geometry(), std::vector<double>(values().begin(), values().end()), rescale_,
                            std::move(metadata));
    }

private:
    Rescale rescale_;
    Metadata metadata_;
};

/// Boolean voxel set. One byte per voxel; any nonzero byte is normalised to 1.
class BinaryMask : public VoxelGrid<std::uint8_t> {
public:
    BinaryMask(GridGeometry geometry, std::vector<std::uint8_t> bits)
        : VoxelGrid<std::uint8_t>(std::move(geometry), normalise(std::move(bits))) {}

    explicit BinaryMask(GridGeometry geometry) : VoxelGrid<std::uint8_t>(std::move(geometry), std::uint8_t{0}) {}

    bool test(const VoxelIndex& v) const { return at(v) != 0; }
    bool test(std::size_t linear) const noexcept { return (*this)[linear] != 0; }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto b : data()) n += b;
        return n;
    }

    friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
        return a.geometry().dims() == b.geometry().dims() &&
               std::equal(a.data().begin(), a.data().end(), b.data().begin());
    }

private:
    static std::vector<std::uint8_t> normalise(std::vector<std::uint8_t> bits) {
        for (auto& b : bits) b = b != 0;
        return bits;
    }
};

/// Builds a mask from a predicate over voxel indices.
template <class Pred>
BinaryMask make_mask(const GridGeometry& g, Pred&& pred) {
    std::vector<std::uint8_t> bits(g.voxel_count());
    for (std::size_t k = 0; k < g.nz(); ++k)
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) bits[g.linear({i, j, k})] = pred(VoxelIndex{i, j, k}) ? 1 : 0;
    return BinaryMask(g, std::move(bits));
}

/// Euclidean distance between two voxel centres in mm.
inline double world_distance(const VoxelIndex& a, const VoxelIndex& b, const GridGeometry& g) {
    g.require_contains(a);
    g.require_contains(b);
    const double d[3] = {(double(a.i) - double(b.i)) * g.spacing()[0], (double(a.j) - double(b.j)) * g.spacing()[1],
                         (double(a.k) - double(b.k)) * g.spacing()[2]};
    return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
}

/// In-bounds voxels sharing a face, edge or corner with `x`, in k-major then
/// j then i offset order.
inline std::vector<VoxelIndex> neighborhood26(const VoxelIndex& x, const GridGeometry& g) {
    g.require_contains(x);
    std::vector<VoxelIndex> out;
    out.reserve(26);
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                if (di == 0 && dj == 0 && dk == 0) continue;
                // Unsigned wrap on -1 at index 0 lands far out of bounds.
                const VoxelIndex n{x.i + std::size_t(std::ptrdiff_t(di)), x.j + std::size_t(std::ptrdiff_t(dj)),
                                   x.k + std::size_t(std::ptrdiff_t(dk))};
                if (g.contains(n)) out.push_back(n);
            }
    return out;
}

}  // namespace pvc
