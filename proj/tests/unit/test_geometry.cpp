#include <gtest/gtest.h>

#include "fnsynth/core/volume.hpp"

using namespace fnsynth;

TEST(Geometry, IndexIsXFastestAndRoundTrips) {
    const auto g = VolumeGeometry::make({4, 3, 2});
    EXPECT_EQ(g.index(1, 0, 0), 1u);
    EXPECT_EQ(g.index(0, 1, 0), 4u);
    EXPECT_EQ(g.index(0, 0, 1), 12u);
    for (std::size_t i = 0; i < g.voxel_count(); ++i) EXPECT_EQ(g.index(g.position(i)), i);
}

TEST(Geometry, ValidateRejectsBadGrids) {
    EXPECT_THROW(VolumeGeometry::make({0, 3, 3}), DimensionError);
    EXPECT_THROW(VolumeGeometry::make({3, 3, 3}, {1.0, -1.0, 1.0}), ArgumentError);
    VolumeGeometry g = VolumeGeometry::make({2, 2, 2});
    g.affine[2][2] = 0.0;
    EXPECT_THROW(g.validate(), ArgumentError);
}

TEST(Geometry, AffineMultiplyAndApply) {
    Affine shift = identity_affine();
    shift[0][3] = 5;
    const Affine a = multiply(shift, diagonal_affine({2, 3, 4}));
    const Vec3 p = apply_affine(a, {1, 1, 1});
    EXPECT_DOUBLE_EQ(p[0], 7);
    EXPECT_DOUBLE_EQ(p[1], 3);
    EXPECT_DOUBLE_EQ(p[2], 4);
    EXPECT_DOUBLE_EQ(linear_determinant(a), 24);
}

TEST(Volume, BufferSizeMustMatch) {
    EXPECT_THROW(Volume<int>(VolumeGeometry::make({2, 2, 2}), std::vector<int>(7)), DimensionError);
}

TEST(LabelVolume, MasksAndValidation) {
    LabelVolume v(VolumeGeometry::make({3, 1, 1}), Vocabulary::feta(), 0);
    v[1] = 3;
    v[2] = 4;
    EXPECT_EQ(count(v.foreground()), 2u);
    EXPECT_EQ(count(v.mask_of_role(Role::WhiteMatter)), 1u);
    EXPECT_EQ(count_code(v, 4), 1u);
    v[0] = 99;
    EXPECT_THROW(v.validate(), UnmappedLabelError);
}
