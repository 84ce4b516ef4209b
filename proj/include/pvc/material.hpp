#pragma once

// HU -> equivalent density -> elastic modulus, and grouping of moduli into
// a fixed number of material bins per bone class for FE preprocessors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pvc/errors.hpp"

namespace pvc {

/// Linear phantom calibration: density (g/cm^3) = slope * HU + intercept.
struct CalibrationCurve {
    double slope = 1.0;
    double intercept = 0.0;

    void validate() const {
        if (slope == 0.0 || !std::isfinite(slope) || !std::isfinite(intercept))
            throw DomainError("calibration slope must be finite and non-zero");
    }
};

inline double hu_to_density(double hu, const CalibrationCurve& c) { return c.slope * hu + c.intercept; }

/// E = A * rho^B in MPa, capped at `e_max`.
struct DensityModulusLaw {
    static constexpr double kDefaultEMax = 20000.0;  // MPa

    double a = 0.0;
    double b = 0.0;
    double e_max = kDefaultEMax;

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0) || !(e_max > 0.0) || !std::isfinite(a) || !std::isfinite(b) ||
            !std::isfinite(e_max))
            throw DomainError("density-modulus law needs A > 0, B > 0 and E_max > 0");
    }
};

inline double density_to_modulus(double rho, const DensityModulusLaw& law) {
    law.validate();
    if (!(rho >= 0.0)) throw DomainError("density must be non-negative, got " + std::to_string(rho));
    return std::min(law.a * std::pow(rho, law.b), law.e_max);
}

enum class BoneClass { trabecular, cortical };

inline const char* to_string(BoneClass c) { return c == BoneClass::cortical ? "cortical" : "trabecular"; }

struct MaterialSample {
    double density;  // g/cm^3
    double modulus;  // MPa
};

struct MaterialBin {
    double lower;    // MPa
    double upper;    // MPa, inclusive only for the last bin of a class
    std::size_t count;
    double modulus;  // representative: member mean, or bin centre when empty
};

struct ClassBins {
    BoneClass bone_class;
    double min_modulus;
    double max_modulus;
    std::vector<MaterialBin> bins;
};

struct BinRef {
    BoneClass bone_class;
    std::size_t bin;

    friend bool operator==(const BinRef&, const BinRef&) = default;
};

struct MaterialBins {
    static constexpr std::size_t kBinsPerClass = 100;
    static constexpr double kPoissonRatio = 0.3;

    double threshold_density;
    double poisson = kPoissonRatio;
    std::optional<ClassBins> trabecular;
    std::optional<ClassBins> cortical;
    /// Bin of each input sample, in input order.
    std::vector<BinRef> assignments;

    const ClassBins* classes(BoneClass c) const { return c == BoneClass::cortical ? opt(cortical) : opt(trabecular); }
    std::size_t total_bins() const {
        return (trabecular ? trabecular->bins.size() : 0) + (cortical ? cortical->bins.size() : 0);
    }

private:
    static const ClassBins* opt(const std::optional<ClassBins>& c) { return c ? &*c : nullptr; }
};

/// Samples with density >= threshold are cortical, the rest trabecular.
inline BoneClass classify(double density, double threshold_density) {
    return density >= threshold_density ? BoneClass::cortical : BoneClass::trabecular;
}

namespace detail {

// Equal-width split of [lo, hi]. Bin b covers [lo + b*w, lo + (b+1)*w), the
// last bin is closed at hi. A zero-width range collapses onto bin 0.
class EqualWidthBinner {
public:
    EqualWidthBinner(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n), width_((hi - lo) / double(n)) {}

    double lower(std::size_t b) const { return b == 0 ? lo_ : (b >= n_ ? hi_ : lo_ + double(b) * width_); }
    double upper(std::size_t b) const { return b + 1 >= n_ ? hi_ : lower(b + 1); }

    std::size_t locate(double v) const {
        if (!(width_ > 0.0)) return 0;
        const double f = std::floor((v - lo_) / width_);
        std::size_t b = f <= 0.0 ? 0 : std::min(n_ - 1, std::size_t(f));
        // Guard against the division landing one bin off the stored edges.
        while (b > 0 && v < lower(b)) --b;
        while (b + 1 < n_ && v >= lower(b + 1)) ++b;
        return b;
    }

private:
    double lo_, hi_;
    std::size_t n_;
    double width_;
};

}  // namespace detail

/// Groups moduli into 100 equal-width bins per bone class. A class with no
/// samples produces no bins.
inline MaterialBins build_bins(std::span<const MaterialSample> samples, double threshold_density) {
    if (samples.empty()) throw ContractError("build_bins: no samples");
    if (!std::isfinite(threshold_density)) throw DomainError("build_bins: threshold density must be finite");

    MaterialBins out{threshold_density, MaterialBins::kPoissonRatio, std::nullopt, std::nullopt, {}};
    out.assignments.reserve(samples.size());

    for (BoneClass cls : {BoneClass::trabecular, BoneClass::cortical}) {
        double lo = 0.0, hi = 0.0;
        bool any = false;
        for (const auto& s : samples) {
            if (classify(s.density, threshold_density) != cls) continue;
            if (!std::isfinite(s.modulus)) throw DomainError("build_bins: non-finite modulus");
            lo = any ? std::min(lo, s.modulus) : s.modulus;
            hi = any ? std::max(hi, s.modulus) : s.modulus;
            any = true;
        }
        if (!any) continue;

        const detail::EqualWidthBinner binner(lo, hi, MaterialBins::kBinsPerClass);
        std::vector<double> sums(MaterialBins::kBinsPerClass, 0.0);
        ClassBins cb{cls, lo, hi, {}};
        cb.bins.reserve(MaterialBins::kBinsPerClass);
        for (std::size_t b = 0; b < MaterialBins::kBinsPerClass; ++b)
            cb.bins.push_back({binner.lower(b), binner.upper(b), 0, 0.0});
        for (const auto& s : samples) {
            if (classify(s.density, threshold_density) != cls) continue;
            const std::size_t b = binner.locate(s.modulus);
            ++cb.bins[b].count;
            sums[b] += s.modulus;
        }
        for (std::size_t b = 0; b < cb.bins.size(); ++b) {
            auto& bin = cb.bins[b];
            bin.modulus = bin.count ? std::clamp(sums[b] / double(bin.count), bin.lower, bin.upper)
                                    : 0.5 * (bin.lower + bin.upper);
        }
        (cls == BoneClass::cortical ? out.cortical : out.trabecular) = std::move(cb);
    }

    for (const auto& s : samples) {
        const BoneClass cls = classify(s.density, threshold_density);
        const ClassBins& cb = *out.classes(cls);
        const detail::EqualWidthBinner binner(cb.min_modulus, cb.max_modulus, MaterialBins::kBinsPerClass);
        out.assignments.push_back({cls, binner.locate(s.modulus)});
    }
    return out;
}

/// Whitespace-separated table, one row per bin, preceded by '#' comment lines.
inline void write_material_table(std::ostream& os, const MaterialBins& bins) {
    os << "# material bins: threshold_density=" << bins.threshold_density << " g/cm3, poisson=" << bins.poisson
       << "\n";
    os << "# class bin modulus_min_mpa modulus_max_mpa modulus_mpa poisson count\n";
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << std::setprecision(10);
    for (BoneClass cls : {BoneClass::trabecular, BoneClass::cortical}) {
        const ClassBins* cb = bins.classes(cls);
        if (!cb) continue;
        for (std::size_t b = 0; b < cb->bins.size(); ++b) {
            const auto& bin = cb->bins[b];
            os << to_string(cls) << ' ' << b << ' ' << bin.lower << ' ' << bin.upper << ' ' << bin.modulus << ' '
               << bins.poisson << ' ' << bin.count << '\n';
        }
    }
    os.flags(flags);
    os.precision(precision);
}

}  // namespace pvc
