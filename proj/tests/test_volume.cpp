#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pvc/volume.hpp"

using namespace pvc;

namespace {

GridGeometry grid(std::size_t nx, std::size_t ny, std::size_t nz, Vec3 spacing = {1, 1, 1}) {
    return GridGeometry({nx, ny, nz}, spacing);
}

}  // namespace

TEST(GridGeometry, RejectsZeroDimsAndNonPositiveSpacing) {
    EXPECT_THROW(GridGeometry({0, 1, 1}, {1, 1, 1}), GeometryError);
    EXPECT_THROW(GridGeometry({1, 1, 1}, {1, 0, 1}), GeometryError);
    EXPECT_THROW(GridGeometry({1, 1, 1}, {1, 1, -2}), GeometryError);
}

TEST(GridGeometry, RejectsNonOrthonormalAxes) {
    EXPECT_THROW(GridGeometry({2, 2, 2}, {1, 1, 1}, {}, {Vec3{1, 0, 0}, Vec3{0, 2, 0}, Vec3{0, 0, 1}}),
                 GeometryError);
    EXPECT_THROW(GridGeometry({2, 2, 2}, {1, 1, 1}, {}, {Vec3{1, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 0, 1}}),
                 GeometryError);
    const double h = std::sqrt(0.5);
    EXPECT_NO_THROW(GridGeometry({2, 2, 2}, {1, 1, 1}, {}, {Vec3{h, h, 0}, Vec3{-h, h, 0}, Vec3{0, 0, 1}}));
}

TEST(GridGeometry, LinearIndexIsXFastest) {
    const auto g = grid(3, 4, 5);
    EXPECT_EQ(g.linear({1, 0, 0}), 1u);
    EXPECT_EQ(g.linear({0, 1, 0}), 3u);
    EXPECT_EQ(g.linear({0, 0, 1}), 12u);
    for (std::size_t p = 0; p < g.voxel_count(); ++p) EXPECT_EQ(g.linear(g.index_of(p)), p);
}

TEST(GridGeometry, WorldPositionFollowsAxes) {
    const GridGeometry g({4, 4, 4}, {0.5, 0.25, 2.0}, {10, 20, 30}, {Vec3{0, 1, 0}, Vec3{-1, 0, 0}, Vec3{0, 0, 1}});
    const Vec3 p = g.world_position({2, 4 - 1, 1});
    EXPECT_DOUBLE_EQ(p[0], 10 - 3 * 0.25);
    EXPECT_DOUBLE_EQ(p[1], 20 + 2 * 0.5);
    EXPECT_DOUBLE_EQ(p[2], 32);
}

TEST(Alignment, ToleratesTinySpacingAndOriginDifferences) {
    const GridGeometry a({4, 4, 4}, {0.488, 0.488, 1.0}, {0, 0, 0});
    const GridGeometry b({4, 4, 4}, {0.488 + 5e-7, 0.488, 1.0}, {5e-4, 0, 0});
    const GridGeometry c({4, 4, 4}, {0.488 + 5e-6, 0.488, 1.0});
    const GridGeometry d({4, 4, 4}, {0.488, 0.488, 1.0}, {0, 2e-3, 0});
    const GridGeometry e({4, 4, 5}, {0.488, 0.488, 1.0});
    EXPECT_NO_THROW(require_aligned(a, b, "t"));
    EXPECT_THROW(require_aligned(a, c, "t"), AlignmentError);
    EXPECT_THROW(require_aligned(a, d, "t"), AlignmentError);
    EXPECT_THROW(require_aligned(a, e, "t"), AlignmentError);
}

TEST(ScalarVolume, RejectsWrongValueCountAndZeroSlope) {
    EXPECT_THROW(ScalarVolume(grid(2, 2, 2), std::vector<double>(7)), GeometryError);
    EXPECT_THROW(ScalarVolume(grid(2, 2, 2), std::vector<double>(8), Rescale{0.0, 1.0}), DomainError);
}

TEST(BinaryMask, NormalisesNonzeroBytes) {
    const BinaryMask m(grid(2, 1, 1), {0, 7});
    EXPECT_EQ(m[1], 1);
    EXPECT_EQ(m.count(), 1u);
}

TEST(WorldDistance, Examples) {
    EXPECT_EQ(world_distance({0, 0, 0}, {0, 0, 0}, grid(2, 2, 2, {0.3, 0.7, 1.9})), 0.0);
    EXPECT_DOUBLE_EQ(world_distance({0, 0, 0}, {1, 0, 0}, grid(2, 2, 2, {0.488, 0.488, 1.0})), 0.488);
    EXPECT_NEAR(world_distance({0, 0, 0}, {1, 1, 1}, grid(2, 2, 2)), 1.7320508, 1e-7);
}

TEST(WorldDistance, OutOfBoundsThrows) {
    EXPECT_THROW(world_distance({0, 0, 0}, {2, 0, 0}, grid(2, 2, 2)), BoundsError);
}

TEST(WorldDistance, MetricAxiomsOnRandomTriples) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> idx(0, 9);
    std::uniform_real_distribution<double> sp(0.1, 3.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto g = grid(10, 10, 10, {sp(rng), sp(rng), sp(rng)});
        const VoxelIndex a{idx(rng), idx(rng), idx(rng)}, b{idx(rng), idx(rng), idx(rng)},
            c{idx(rng), idx(rng), idx(rng)};
        const double ab = world_distance(a, b, g), ba = world_distance(b, a, g);
        EXPECT_EQ(ab, ba);
        EXPECT_EQ(ab == 0.0, a == b);
        EXPECT_LE(world_distance(a, c, g), ab + world_distance(b, c, g) + 1e-12);
    }
}

TEST(Neighborhood26, Examples) {
    const auto g = grid(3, 3, 3);
    EXPECT_EQ(neighborhood26({1, 1, 1}, g).size(), 26u);
    EXPECT_EQ(neighborhood26({0, 0, 0}, g).size(), 7u);
    // Oracle: offsets i in {0,1}, j,k in {0,1,2}, minus self.
    std::size_t expected = 0;
    for (std::size_t i = 0; i <= 1; ++i)
        for (std::size_t j = 0; j <= 2; ++j)
            for (std::size_t k = 0; k <= 2; ++k) expected += !(i == 0 && j == 1 && k == 1);
    EXPECT_EQ(expected, 17u);
    EXPECT_EQ(neighborhood26({0, 1, 1}, g).size(), expected);
}

TEST(Neighborhood26, SizesByGridPosition) {
    const auto g = grid(4, 5, 6);
    for (std::size_t p = 0; p < g.voxel_count(); ++p) {
        const VoxelIndex v = g.index_of(p);
        int on_boundary = (v.i == 0 || v.i == 3) + (v.j == 0 || v.j == 4) + (v.k == 0 || v.k == 5);
        static const std::size_t by_boundary_axes[] = {26, 17, 11, 7};
        EXPECT_EQ(neighborhood26(v, g).size(), by_boundary_axes[on_boundary]);
    }
}

TEST(Neighborhood26, MembershipIsSymmetricAndExcludesSelf) {
    const auto g = grid(4, 3, 5);
    for (std::size_t p = 0; p < g.voxel_count(); ++p) {
        const VoxelIndex a = g.index_of(p);
        const auto na = neighborhood26(a, g);
        EXPECT_EQ(std::count(na.begin(), na.end(), a), 0);
        for (const auto& b : na) {
            const auto nb = neighborhood26(b, g);
            EXPECT_NE(std::find(nb.begin(), nb.end(), a), nb.end());
        }
    }
}
