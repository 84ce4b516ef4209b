#pragma once

// Binary morphology needed to split a segmentation into interior and
// surface voxel sets.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pvc/parallel.hpp"
#include "pvc/volume.hpp"

namespace pvc {

/// Erosion by the 6-connected (face) structuring element. A voxel survives
/// iff it and all six face neighbours are set; outside the grid counts as
/// background, so set voxels on the grid boundary never survive.
inline BinaryMask erode_face_connected(const BinaryMask& mask, unsigned workers = 0) {
    const GridGeometry& g = mask.geometry();
    const std::size_t nx = g.nx(), ny = g.ny(), nz = g.nz();
    const std::size_t sy = nx, sz = nx * ny;
    const auto in = mask.data();
    std::vector<std::uint8_t> out(g.voxel_count(), 0);

    // Grids thinner than 3 along any axis have no voxel with all six neighbours.
    if (nx < 3 || ny < 3 || nz < 3) return BinaryMask(g, std::move(out));

    parallel_for(nz - 2, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin + 1; k < end + 1; ++k)
            for (std::size_t j = 1; j + 1 < ny; ++j) {
                const std::size_t row = sy * j + sz * k;
                for (std::size_t i = 1; i + 1 < nx; ++i) {
                    const std::size_t p = row + i;
                    out[p] = in[p] & in[p - 1] & in[p + 1] & in[p - sy] & in[p + sy] & in[p - sz] & in[p + sz];
                }
            }
    });
    return BinaryMask(g, std::move(out));
}

/// Disjoint split of a segmentation into interior voxels (survive erosion)
/// and surface voxels (everything else in the segmentation).
struct VoxelPartition {
    BinaryMask interior;
    BinaryMask surface;
    BinaryMask source;

    bool is_interior(std::size_t linear) const noexcept { return interior.test(linear); }
    bool is_surface(std::size_t linear) const noexcept { return surface.test(linear); }
};

inline VoxelPartition partition(const BinaryMask& mask, unsigned workers = 0) {
    BinaryMask interior = erode_face_connected(mask, workers);
    const auto src = mask.data();
    const auto inn = interior.data();
    std::vector<std::uint8_t> surface(src.size());
    for (std::size_t p = 0; p < src.size(); ++p) surface[p] = src[p] & (inn[p] ^ 1u);
    BinaryMask surf(mask.geometry(), std::move(surface));
    return VoxelPartition{std::move(interior), std::move(surf), mask};
}

}  // namespace pvc
