#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pvc/material.hpp"
#include "support/oracles.hpp"
#include "support/specimens.hpp"

using namespace pvc;

namespace {

std::vector<MaterialSample> trabecular_only(const std::vector<double>& moduli) {
    std::vector<MaterialSample> out;
    for (double e : moduli) out.push_back({0.5, e});
    return out;
}

}  // namespace

TEST(Calibration, Examples) {
    EXPECT_EQ(hu_to_density(375, {1.0, 0.0}), 375.0);
    EXPECT_DOUBLE_EQ(hu_to_density(1000, {0.001, 0.0}), 1.0);
    EXPECT_EQ(hu_to_density(0, {0.0008, 0.12}), 0.12);
}

TEST(Calibration, ZeroSlopeIsRejected) { EXPECT_THROW((CalibrationCurve{0.0, 1.0}.validate()), DomainError); }

TEST(Calibration, IsAffine) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> hu(-1500, 3000), s(-0.01, 0.01), c(-2, 2);
    for (int t = 0; t < 2000; ++t) {
        const CalibrationCurve cal{s(rng), c(rng)};
        const double a = hu(rng), b = hu(rng);
        const double lhs = hu_to_density(a, cal) + hu_to_density(b, cal);
        const double rhs = hu_to_density(a + b, cal) + hu_to_density(0, cal);
        EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(lhs)));
    }
}

TEST(DensityModulus, SpecimenThreeAtUnitDensityGivesA) {
    const DensityModulusLaw law{12277.42, 0.994193};
    EXPECT_EQ(density_to_modulus(1.0, law), 12277.42);
}

TEST(DensityModulus, AllSpecimensAtUnitDensityGiveA) {
    for (const auto& s : specimens::kLaws)
        EXPECT_NEAR(density_to_modulus(1.0, {s.a, s.b}), s.a, 1e-6 * s.a) << "specimen " << s.specimen;
}

TEST(DensityModulus, ZeroDensityGivesZero) { EXPECT_EQ(density_to_modulus(0.0, {12277.42, 0.994193}), 0.0); }

TEST(DensityModulus, CappedAtTwentyGigapascal) {
    const DensityModulusLaw law{12277.42, 0.994193};
    EXPECT_EQ(law.e_max, 20000.0);
    EXPECT_GT(12277.42 * std::pow(2.0, 0.994193), 20000.0);
    EXPECT_EQ(density_to_modulus(2.0, law), 20000.0);
    EXPECT_EQ(density_to_modulus(50.0, law), 20000.0);
}

TEST(DensityModulus, RejectsNegativeDensityAndBadLaw) {
    EXPECT_THROW(density_to_modulus(-0.01, {12277.42, 0.994193}), DomainError);
    EXPECT_THROW(density_to_modulus(1.0, {0.0, 1.0}), DomainError);
    EXPECT_THROW(density_to_modulus(1.0, {1.0, -1.0}), DomainError);
    EXPECT_THROW(density_to_modulus(1.0, {1.0, 1.0, 0.0}), DomainError);
}

TEST(DensityModulus, MonotoneAndBounded) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> rho(0.0, 4.0);
    for (const auto& s : specimens::kLaws) {
        const DensityModulusLaw law{s.a, s.b};
        for (int t = 0; t < 1000; ++t) {
            double r1 = rho(rng), r2 = rho(rng);
            if (r1 > r2) std::swap(r1, r2);
            const double e1 = density_to_modulus(r1, law), e2 = density_to_modulus(r2, law);
            EXPECT_LE(e1, e2);
            EXPECT_LE(e2, 20000.0);
            EXPECT_GE(e1, 0.0);
        }
    }
}

TEST(Binning, TwoHundredValuesSpanningBothClasses) {
    std::vector<MaterialSample> samples;
    for (int i = 0; i < 200; ++i) samples.push_back({i < 100 ? 0.4 : 1.6, 100.0 + 50.0 * i});
    const auto bins = build_bins(samples, 1.0);
    ASSERT_TRUE(bins.trabecular && bins.cortical);
    EXPECT_EQ(bins.trabecular->bins.size(), 100u);
    EXPECT_EQ(bins.cortical->bins.size(), 100u);
    EXPECT_EQ(bins.total_bins(), 200u);
    EXPECT_EQ(bins.assignments.size(), 200u);
    std::size_t total = 0;
    for (const auto* cb : {&*bins.trabecular, &*bins.cortical})
        for (const auto& b : cb->bins) total += b.count;
    EXPECT_EQ(total, 200u);
    EXPECT_EQ(bins.poisson, 0.3);
}

TEST(Binning, IdenticalValuesShareOneBin) {
    const auto bins = build_bins(trabecular_only(std::vector<double>(37, 4321.5)), 1.0);
    ASSERT_TRUE(bins.trabecular);
    EXPECT_FALSE(bins.cortical);
    const auto& b = bins.trabecular->bins;
    EXPECT_EQ(b[0].count, 37u);
    EXPECT_EQ(b[0].modulus, 4321.5);
    for (std::size_t i = 1; i < b.size(); ++i) EXPECT_EQ(b[i].count, 0u);
}

TEST(Binning, OneToThousandMatchesScalarPartitioner) {
    std::vector<double> moduli;
    for (int v = 1; v <= 1000; ++v) moduli.push_back(v);
    const auto bins = build_bins(trabecular_only(moduli), 1.0);
    const auto& cb = *bins.trabecular;
    EXPECT_NEAR(cb.bins[0].upper - cb.bins[0].lower, 9.99, 1e-9);
    EXPECT_NEAR(cb.bins[57].upper - cb.bins[57].lower, 9.99, 1e-9);
    EXPECT_EQ(oracle::bin_of(500, 1, 1000, 100), 49u);
    EXPECT_EQ(bins.assignments[499].bin, 49u);
    for (std::size_t i = 0; i < moduli.size(); ++i)
        ASSERT_EQ(bins.assignments[i].bin, oracle::bin_of(moduli[i], 1, 1000, 100)) << moduli[i];
    EXPECT_EQ(bins.assignments.back().bin, 99u);
}

TEST(Binning, EmptyInputThrows) { EXPECT_THROW(build_bins({}, 1.0), ContractError); }

TEST(Binning, ThresholdOutsideDataLeavesOneClassEmpty) {
    std::vector<MaterialSample> samples;
    for (int i = 0; i < 50; ++i) samples.push_back({0.2 + 0.01 * i, 1000.0 + i});
    const auto bins = build_bins(samples, 5.0);
    EXPECT_FALSE(bins.cortical);
    ASSERT_TRUE(bins.trabecular);
    EXPECT_EQ(bins.trabecular->bins.size(), 100u);
    EXPECT_EQ(bins.classes(BoneClass::cortical), nullptr);
}

TEST(Binning, ThresholdIsInclusiveForCortical) {
    EXPECT_EQ(classify(1.0, 1.0), BoneClass::cortical);
    EXPECT_EQ(classify(0.999, 1.0), BoneClass::trabecular);
}

TEST(Binning, TotalContiguousAndRepresentativeInRange) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> rho(0.0, 2.0);
    std::uniform_int_distribution<int> n(1, 3000);
    for (int t = 0; t < 60; ++t) {
        const auto& s = specimens::kLaws[std::size_t(t) % specimens::kLaws.size()];
        std::vector<MaterialSample> samples(std::size_t(n(rng)));
        for (auto& m : samples) {
            m.density = rho(rng);
            m.modulus = density_to_modulus(m.density, {s.a, s.b});
        }
        const auto bins = build_bins(samples, 1.0);
        ASSERT_EQ(bins.assignments.size(), samples.size());
        for (BoneClass cls : {BoneClass::trabecular, BoneClass::cortical}) {
            const ClassBins* cb = bins.classes(cls);
            if (!cb) continue;
            ASSERT_EQ(cb->bins.size(), 100u);
            EXPECT_EQ(cb->bins.front().lower, cb->min_modulus);
            EXPECT_EQ(cb->bins.back().upper, cb->max_modulus);
            for (std::size_t b = 0; b < cb->bins.size(); ++b) {
                const auto& bin = cb->bins[b];
                if (b > 0) {
                    EXPECT_EQ(bin.lower, cb->bins[b - 1].upper);
                }
                EXPECT_GE(bin.modulus, bin.lower);
                EXPECT_LE(bin.modulus, bin.upper);
            }
        }
        std::size_t counted = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto ref = bins.assignments[i];
            ASSERT_EQ(ref.bone_class, classify(samples[i].density, 1.0));
            const auto& cb = *bins.classes(ref.bone_class);
            const auto& bin = cb.bins[ref.bin];
            ASSERT_GE(samples[i].modulus, bin.lower);
            ASSERT_TRUE(samples[i].modulus < bin.upper || (ref.bin == 99 && samples[i].modulus == bin.upper));
            ASSERT_EQ(ref.bin, oracle::bin_of(samples[i].modulus, cb.min_modulus, cb.max_modulus, 100));
            ++counted;
        }
        EXPECT_EQ(counted, samples.size());
    }
}

TEST(Binning, RepresentativeIsMemberMeanOrCentre) {
    const auto bins = build_bins(trabecular_only({0.0, 0.25, 0.5, 2.0, 100.0}), 1.0);
    const auto& b = bins.trabecular->bins;
    EXPECT_EQ(b[0].count, 3u);
    EXPECT_DOUBLE_EQ(b[0].modulus, 0.25);
    EXPECT_EQ(b[2].count, 1u);
    EXPECT_DOUBLE_EQ(b[2].modulus, 2.0);
    EXPECT_EQ(b[50].count, 0u);
    EXPECT_DOUBLE_EQ(b[50].modulus, 50.5);
    EXPECT_EQ(b[99].count, 1u);
    EXPECT_DOUBLE_EQ(b[99].modulus, 100.0);
}

TEST(MaterialTable, OneRowPerBinWithPoisson) {
    std::vector<MaterialSample> samples{{0.5, 10.0}, {0.5, 20.0}, {1.5, 15000.0}};
    const auto bins = build_bins(samples, 1.0);
    std::ostringstream os;
    write_material_table(os, bins);
    std::istringstream is(os.str());
    std::string line;
    std::size_t rows = 0, comments = 0;
    while (std::getline(is, line)) {
        if (line.starts_with("#")) {
            ++comments;
            continue;
        }
        std::istringstream row(line);
        std::string cls;
        std::size_t bin, count;
        double lo, hi, e, nu;
        ASSERT_TRUE(row >> cls >> bin >> lo >> hi >> e >> nu >> count) << line;
        EXPECT_EQ(nu, 0.3);
        EXPECT_LE(lo, e);
        EXPECT_LE(e, hi);
        ++rows;
    }
    EXPECT_EQ(rows, 200u);
    EXPECT_EQ(comments, 2u);
}
