#pragma once

// Partial-volume correction of segmented bone surfaces.
//
// Every surface voxel x is compared against an inverse-distance-weighted
// estimate u(x) built from the interior voxels of its 26-neighbourhood:
//
//     w_i  = 1 / d(x, x_i)^p          for interior x_i in P(x), else 0
//     u(x) = sum(w_i * HU_i) / sum(w_i)   (0 when no interior neighbour)
//     HU'(x) = max(h(x), u(x)) if u(x) != 0, else h(x)
//
// Interior and background voxels are never written, so u(x) only reads
// values that are identical in the input and the output.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pvc/errors.hpp"
#include "pvc/morphology.hpp"
#include "pvc/parallel.hpp"
#include "pvc/volume.hpp"

namespace pvc {

/// Inverse-distance weight 1 / d^p. The square is written as a product:
/// glibc pow(d, 2) may differ from d * d in the last bit, and compilers
/// substitute d * d whenever the exponent is a constant 2, so spelling it
/// out keeps results identical across call sites.
inline double idw_weight(double d, double p) { return p == 2.0 ? 1.0 / (d * d) : 1.0 / std::pow(d, p); }

struct PvcParams {
    /// Inverse-distance exponent.
    double power = 2.0;

    void validate() const {
        if (!(power > 0.0) || !std::isfinite(power)) throw DomainError("IDW power must be positive");
    }
};

struct CorrectionReport {
    std::size_t surface_count = 0;
    std::size_t interior_count = 0;
    std::size_t raised_count = 0;
    std::size_t unchanged_count = 0;
    /// Surface voxels with no interior 26-neighbour; they are left as-is.
    std::size_t uncorrectable_count = 0;
    double mean_delta = 0.0;  // HU, averaged over all surface voxels
    double max_delta = 0.0;   // HU

    friend bool operator==(const CorrectionReport&, const CorrectionReport&) = default;
};

struct CorrectionResult {
    ScalarVolume volume;
    CorrectionReport report;
};

struct WeightedNeighbor {
    VoxelIndex index;
    double weight;
};

/// Interior voxels of P(x) with their weights 1/d^p, in neighbourhood order.
inline std::vector<WeightedNeighbor> idw_weights(const VoxelIndex& x, const VoxelPartition& part,
                                                 const GridGeometry& g, double power) {
    g.require_contains(x);
    require_aligned(g, part.source.geometry(), "idw_weights");
    if (!part.surface.test(x)) throw ContractError("idw_weights: voxel is not a surface voxel");
    std::vector<WeightedNeighbor> out;
    for (const VoxelIndex& n : neighborhood26(x, g)) {
        if (!part.interior.test(n)) continue;
        const double d = world_distance(x, n, g);
        assert(d != 0.0);  // x is not interior, so it never contributes to itself
        out.push_back({n, idw_weight(d, power)});
    }
    return out;
}

/// u(x): weighted mean of interior neighbours, or 0 when there are none.
inline double idw_estimate(const VoxelIndex& x, const ScalarVolume& volume, const VoxelPartition& part,
                           const PvcParams& params = {}) {
    params.validate();
    require_aligned(volume.geometry(), part.source.geometry(), "idw_estimate");
    const auto weights = idw_weights(x, part, volume.geometry(), params.power);
    double num = 0.0, den = 0.0;
    for (const auto& [n, w] : weights) {
        num += w * volume.at(n);
        den += w;
    }
    return den != 0.0 ? num / den : 0.0;
}

namespace detail {

struct NeighborOffset {
    int di, dj, dk;
    std::ptrdiff_t linear;
    double weight;
};

// The 26 offsets in neighborhood26 order with weights computed exactly as
// world_distance would, so the fast path is bit-identical to idw_estimate.
inline std::array<NeighborOffset, 26> neighbor_offsets(const GridGeometry& g, double power) {
    std::array<NeighborOffset, 26> out{};
    const auto& s = g.spacing();
    const auto sy = std::ptrdiff_t(g.nx()), sz = std::ptrdiff_t(g.nx() * g.ny());
    std::size_t n = 0;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                if (di == 0 && dj == 0 && dk == 0) continue;
                const double d[3] = {-double(di) * s[0], -double(dj) * s[1], -double(dk) * s[2]};
                const double dist = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
                out[n++] = {di, dj, dk, di + sy * dj + sz * dk, idw_weight(dist, power)};
            }
    return out;
}

}  // namespace detail

/// Applies the surface correction to `volume` using segmentation `mask`.
/// Output is bit-identical for every worker count (0 = all cores).
inline CorrectionResult correct(const ScalarVolume& volume, const BinaryMask& mask, const PvcParams& params = {},
                                unsigned workers = 0) {
    params.validate();
    require_aligned(volume.geometry(), mask.geometry(), "correct: mask does not match volume");
    const GridGeometry& g = volume.geometry();
    const VoxelPartition part = partition(mask, workers);
    const auto offsets = detail::neighbor_offsets(g, params.power);

    const auto in = volume.values();
    const auto surf = part.surface.data();
    const auto inner = part.interior.data();
    std::vector<double> out(in.begin(), in.end());

    const std::size_t nx = g.nx(), ny = g.ny(), nz = g.nz();
    std::vector<std::size_t> uncorrectable_per_slice(nz, 0);

    parallel_for(nz, workers, [&](std::size_t kbegin, std::size_t kend) {
        for (std::size_t k = kbegin; k < kend; ++k) {
            const bool k_edge = k == 0 || k + 1 == nz;
            for (std::size_t j = 0; j < ny; ++j) {
                const bool jk_edge = k_edge || j == 0 || j + 1 == ny;
                const std::size_t row = nx * (j + ny * k);
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t p = row + i;
                    if (!surf[p]) continue;
                    const bool edge = jk_edge || i == 0 || i + 1 == nx;
                    double num = 0.0, den = 0.0;
                    for (const auto& o : offsets) {
                        if (edge) {
                            const auto ii = std::ptrdiff_t(i) + o.di, jj = std::ptrdiff_t(j) + o.dj,
                                       kk = std::ptrdiff_t(k) + o.dk;
                            if (ii < 0 || jj < 0 || kk < 0 || ii >= std::ptrdiff_t(nx) ||
                                jj >= std::ptrdiff_t(ny) || kk >= std::ptrdiff_t(nz))
                                continue;
                        }
                        const std::size_t q = std::size_t(std::ptrdiff_t(p) + o.linear);
                        if (!inner[q]) continue;
                        num += o.weight * in[q];
                        den += o.weight;
                    }
                    if (den == 0.0) {
                        ++uncorrectable_per_slice[k];
                        continue;
                    }
                    const double u = num / den;
                    if (u != 0.0) out[p] = std::max(in[p], u);
                }
            }
        }
    });

    // Serial reduction in voxel order keeps the report independent of workers.
    CorrectionReport report;
    double delta_sum = 0.0;
    for (std::size_t p = 0; p < in.size(); ++p) {
        report.interior_count += inner[p];
        if (!surf[p]) continue;
        ++report.surface_count;
        const double delta = out[p] - in[p];
        if (delta > 0.0) {
            ++report.raised_count;
            delta_sum += delta;
            report.max_delta = std::max(report.max_delta, delta);
        } else {
            ++report.unchanged_count;
        }
    }
    for (auto n : uncorrectable_per_slice) report.uncorrectable_count += n;
    if (report.surface_count > 0) report.mean_delta = delta_sum / double(report.surface_count);

    return {volume.with_values(std::move(out)), report};
}

}  // namespace pvc
