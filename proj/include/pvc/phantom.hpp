#pragma once

// Synthetic cortical-shell phantoms with known ground truth. A tube is
// rasterised, blurred with a Gaussian PSF to create partial-volume
// depression at its surface, corrected, and scored against the truth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pvc/correction.hpp"
#include "pvc/errors.hpp"
#include "pvc/morphology.hpp"
#include "pvc/parallel.hpp"
#include "pvc/volume.hpp"

namespace pvc {

/// Straight tube along z, centred in the grid: a cortical shell of
/// `cortical_thickness` around a trabecular core, in a uniform background.
struct PhantomSpec {
    double outer_radius = 0.0;        // mm
    double cortical_thickness = 0.0;  // mm
    double length = 0.0;              // mm, along z, centred
    double cortical_hu = 0.0;
    double trabecular_hu = 0.0;
    double background_hu = 0.0;
    GridGeometry geometry{{1, 1, 1}, {1.0, 1.0, 1.0}};
    double psf_sigma = 0.0;  // mm

    void validate() const {
        if (!(cortical_thickness > 0.0)) throw DomainError("phantom: cortical thickness must be positive");
        if (!(outer_radius > cortical_thickness))
            throw DomainError("phantom: outer radius must exceed cortical thickness");
        if (!(length > 0.0)) throw DomainError("phantom: length must be positive");
        if (!(cortical_hu > trabecular_hu && trabecular_hu > background_hu))
            throw DomainError("phantom: need cortical_hu > trabecular_hu > background_hu");
        if (!(psf_sigma >= 0.0) || !std::isfinite(psf_sigma)) throw DomainError("phantom: psf_sigma must be >= 0");
    }
};

struct PhantomVolumes {
    ScalarVolume ground_truth;
    BinaryMask mask;
};

enum class PhantomTissue { background, trabecular, cortical };

/// Piecewise tissue label at radial distance r (mm) and axial offset z (mm)
/// from the tube centre.
inline PhantomTissue phantom_tissue(const PhantomSpec& spec, double r, double z) {
    if (std::abs(z) > 0.5 * spec.length || r > spec.outer_radius) return PhantomTissue::background;
    if (r >= spec.outer_radius - spec.cortical_thickness) return PhantomTissue::cortical;
    return PhantomTissue::trabecular;
}

inline double phantom_hu(const PhantomSpec& spec, PhantomTissue t) {
    switch (t) {
        case PhantomTissue::cortical: return spec.cortical_hu;
        case PhantomTissue::trabecular: return spec.trabecular_hu;
        default: return spec.background_hu;
    }
}

/// Offset (mm) of voxel centre from the grid centre along each axis.
inline Vec3 phantom_offset(const GridGeometry& g, const VoxelIndex& v) {
    const double idx[3] = {double(v.i), double(v.j), double(v.k)};
    Vec3 out{};
    for (int a = 0; a < 3; ++a) out[a] = (idx[a] - 0.5 * double(g.dims()[a] - 1)) * g.spacing()[a];
    return out;
}

/// Rasterises the tube. The mask is the true segmentation (r <= outer radius).
inline PhantomVolumes generate(const PhantomSpec& spec) {
    spec.validate();
    const GridGeometry& g = spec.geometry;
    const double half_x = 0.5 * double(g.nx() - 1) * g.spacing()[0];
    const double half_y = 0.5 * double(g.ny() - 1) * g.spacing()[1];
    const double half_z = 0.5 * double(g.nz() - 1) * g.spacing()[2];
    if (spec.outer_radius > half_x || spec.outer_radius > half_y)
        throw GeometryError("phantom: outer radius " + std::to_string(spec.outer_radius) +
                            " mm does not fit the grid cross-section");
    if (0.5 * spec.length > half_z)
        throw GeometryError("phantom: length " + std::to_string(spec.length) + " mm does not fit the grid");

    std::vector<double> values(g.voxel_count());
    std::vector<std::uint8_t> bits(g.voxel_count());
    for (std::size_t k = 0; k < g.nz(); ++k)
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) {
                const VoxelIndex v{i, j, k};
                const Vec3 o = phantom_offset(g, v);
                const double r = std::sqrt(o[0] * o[0] + o[1] * o[1]);
                const PhantomTissue t = phantom_tissue(spec, r, o[2]);
                const std::size_t p = g.linear(v);
                values[p] = phantom_hu(spec, t);
                bits[p] = t != PhantomTissue::background;
            }
    return {ScalarVolume(g, std::move(values)), BinaryMask(g, std::move(bits))};
}

inline constexpr double kGaussianTruncation = 4.0;  // kernel radius in sigmas

/// Sampled, normalised Gaussian with radius ceil(truncation * sigma) taps.
inline std::vector<double> gaussian_kernel(double sigma_voxels, double truncation = kGaussianTruncation) {
    if (!(sigma_voxels > 0.0)) return {1.0};
    const auto radius = std::ptrdiff_t(std::ceil(truncation * sigma_voxels));
    std::vector<double> k(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        const double x = double(t) / sigma_voxels;
        sum += k[std::size_t(t + radius)] = std::exp(-0.5 * x * x);
    }
    for (auto& w : k) w /= sum;
    return k;
}

namespace detail {

// Convolves every line along `axis` with `kernel`, replicating edge values.
inline std::vector<double> convolve_axis(std::span<const double> in, const Dims& dims, int axis,
                                         const std::vector<double>& kernel, unsigned workers) {
    std::vector<double> out(in.size());
    const auto radius = std::ptrdiff_t(kernel.size() / 2);
    const std::size_t stride[3] = {1, dims[0], dims[0] * dims[1]};
    const auto n = std::ptrdiff_t(dims[axis]);
    const int a1 = axis == 0 ? 1 : 0, a2 = axis == 2 ? 1 : 2;
    const std::size_t lines = dims[a1] * dims[a2];

    const auto [lo, hi] = std::minmax_element(in.begin(), in.end());
    const double vmin = *lo, vmax = *hi;

    parallel_for(lines, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t line = begin; line < end; ++line) {
            const std::size_t base = (line % dims[a1]) * stride[a1] + (line / dims[a1]) * stride[a2];
            for (std::ptrdiff_t x = 0; x < n; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(x + t, 0, n - 1);
                    acc += kernel[std::size_t(t + radius)] * in[base + std::size_t(src) * stride[axis]];
                }
                // Rounding in the kernel sum can step an ulp past the input range.
                out[base + std::size_t(x) * stride[axis]] = std::clamp(acc, vmin, vmax);
            }
        }
    });
    return out;
}

}  // namespace detail

/// Separable Gaussian blur with standard deviation `sigma_mm` in world units,
/// truncated at 4 sigma, with edge replication at the grid boundary.
inline ScalarVolume blur(const ScalarVolume& v, double sigma_mm, unsigned workers = 0) {
    if (!(sigma_mm >= 0.0) || !std::isfinite(sigma_mm)) throw DomainError("blur: sigma must be >= 0");
    if (sigma_mm == 0.0) return v;
    const GridGeometry& g = v.geometry();
    std::vector<double> cur(v.values().begin(), v.values().end());
    for (int axis = 0; axis < 3; ++axis) {
        const auto kernel = gaussian_kernel(sigma_mm / g.spacing()[axis]);
        if (kernel.size() == 1) continue;
        cur = detail::convolve_axis(cur, g.dims(), axis, kernel, workers);
    }
    return v.with_values(std::move(cur));
}

struct PhantomResult {
    std::size_t surface_count = 0;
    double mae_uncorrected = 0.0;
    double mae_corrected = 0.0;
    double mean_signed_uncorrected = 0.0;
    double mean_signed_corrected = 0.0;
    double improvement_fraction = 0.0;
    /// False when the uncorrected error is zero; the fraction is then 1 by
    /// convention.
    bool improvement_defined = true;
};

/// Surface-voxel error of the blurred and corrected volumes against truth.
inline PhantomResult evaluate(const ScalarVolume& ground_truth, const ScalarVolume& blurred,
                              const ScalarVolume& corrected, const BinaryMask& mask) {
    const GridGeometry& g = ground_truth.geometry();
    require_aligned(g, blurred.geometry(), "evaluate: blurred volume");
    require_aligned(g, corrected.geometry(), "evaluate: corrected volume");
    require_aligned(g, mask.geometry(), "evaluate: mask");

    const VoxelPartition part = partition(mask);
    PhantomResult r;
    double abs_u = 0.0, abs_c = 0.0, sgn_u = 0.0, sgn_c = 0.0;
    for (std::size_t p = 0; p < g.voxel_count(); ++p) {
        if (!part.is_surface(p)) continue;
        ++r.surface_count;
        const double eu = blurred[p] - ground_truth[p];
        const double ec = corrected[p] - ground_truth[p];
        abs_u += std::abs(eu);
        abs_c += std::abs(ec);
        sgn_u += eu;
        sgn_c += ec;
    }
    if (r.surface_count > 0) {
        const double n = double(r.surface_count);
        r.mae_uncorrected = abs_u / n;
        r.mae_corrected = abs_c / n;
        r.mean_signed_uncorrected = sgn_u / n;
        r.mean_signed_corrected = sgn_c / n;
    }
    if (r.mae_uncorrected > 0.0) {
        r.improvement_fraction = 1.0 - r.mae_corrected / r.mae_uncorrected;
    } else {
        r.improvement_fraction = 1.0;
        r.improvement_defined = false;
    }
    return r;
}

struct PhantomRun {
    PhantomVolumes truth;
    ScalarVolume blurred;
    CorrectionResult corrected;
    PhantomResult result;
};

/// generate -> blur -> correct -> evaluate.
inline PhantomRun run_phantom(const PhantomSpec& spec, const PvcParams& params = {}, unsigned workers = 0) {
    PhantomVolumes truth = generate(spec);
    ScalarVolume blurred = blur(truth.ground_truth, spec.psf_sigma, workers);
    CorrectionResult corrected = correct(blurred, truth.mask, params, workers);
    PhantomResult result = evaluate(truth.ground_truth, blurred, corrected.volume, truth.mask);
    return {std::move(truth), std::move(blurred), std::move(corrected), result};
}

}  // namespace pvc
