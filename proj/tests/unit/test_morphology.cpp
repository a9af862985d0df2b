#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <limits>
#include <numeric>

#include "fnsynth/morphology/morphology.hpp"
#include "fnsynth/phantom.hpp"
#include "support/helpers.hpp"

using namespace fnsynth;
using morph::StructuringElement;
using test_support::random_mask;

namespace {

BinaryMask dilate_oracle(const BinaryMask& m, const StructuringElement& e) {
    BinaryMask out = m;
    const auto offs = e.offsets();
    const auto& g = m.geometry();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        const auto p = g.position(i);
        for (const auto& o : offs) {
            const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
            if (g.contains(q)) out.at(q) = 1;
        }
    }
    return out;
}

BinaryMask erode_oracle(const BinaryMask& m, const StructuringElement& e) {
    BinaryMask out(m.geometry(), 0);
    const auto offs = e.offsets();
    const auto& g = m.geometry();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        const auto p = g.position(i);
        bool keep = true;
        for (const auto& o : offs) {
            const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
            if (!g.contains(q) || !m.at(q)) keep = false;
        }
        out[i] = keep;
    }
    return out;
}

// Union-find component count with the given neighbour offsets.
std::vector<std::size_t> component_sizes_oracle(const BinaryMask& m, int conn) {
    std::vector<std::size_t> parent(m.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    const auto offs = morph::neighbor_offsets(conn);
    const auto& g = m.geometry();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i]) continue;
        const auto p = g.position(i);
        for (const auto& o : offs) {
            const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
            if (g.contains(q) && m.at(q)) parent[find(i)] = find(g.index(q));
        }
    }
    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) ++sizes[find(i)];
    std::vector<std::size_t> out;
    for (auto [r, n] : sizes) out.push_back(n);
    std::sort(out.rbegin(), out.rend());
    return out;
}

} // namespace

class MorphElements : public ::testing::TestWithParam<int> {};

TEST_P(MorphElements, DilateErodeMatchBruteForce) {
    const StructuringElement elems[] = {StructuringElement::face(), StructuringElement::full(),
                                        StructuringElement::in_plane(), {StructuringElement::Connectivity::Full, {true, false, true}}};
    const auto e = elems[GetParam()];
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto m = random_mask({9, 7, 6}, 0.35 + 0.1 * (seed % 3), seed);
        ASSERT_EQ(morph::dilate(m, e), dilate_oracle(m, e));
        ASSERT_EQ(morph::erode(m, e), erode_oracle(m, e));
        ASSERT_EQ(morph::dilate(m, e, 2), dilate_oracle(dilate_oracle(m, e), e));
    }
}

INSTANTIATE_TEST_SUITE_P(Elements, MorphElements, ::testing::Values(0, 1, 2, 3));

TEST(Morphology, BorderCountsAsBackgroundForErosion) {
    BinaryMask full(VolumeGeometry::make({4, 4, 4}), 1);
    const auto e = morph::erode(full, StructuringElement::face());
    EXPECT_EQ(count(e), 8u);
}

TEST(Morphology, DilateWithinStaysInRegion) {
    BinaryMask seed(VolumeGeometry::make({7, 7, 1}), 0);
    seed.at(3, 3, 0) = 1;
    BinaryMask region(seed.geometry(), 0);
    for (int x = 0; x < 7; ++x) region.at(x, 3, 0) = 1;
    auto g = seed;
    for (int i = 0; i < 5; ++i) g = morph::dilate_within(g, region, StructuringElement::full());
    EXPECT_EQ(g, region);
}

TEST(Morphology, ComponentsMatchUnionFind) {
    for (int conn : {6, 26})
        for (std::uint64_t seed = 10; seed < 16; ++seed) {
            const auto m = random_mask({12, 10, 8}, 0.3, seed);
            const auto comps = morph::connected_components(m, conn);
            std::vector<std::size_t> sizes;
            std::size_t total = 0;
            for (const auto& c : comps) sizes.push_back(c.size()), total += c.size();
            ASSERT_EQ(sizes, component_sizes_oracle(m, conn));
            ASSERT_EQ(total, count(m));
            for (std::size_t k = 1; k < comps.size(); ++k)
                if (comps[k].size() == comps[k - 1].size()) { ASSERT_LT(comps[k - 1].min_voxel, comps[k].min_voxel); }
        }
}

TEST(Morphology, SquaredDistanceMatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = random_mask({11, 9, 7}, 0.02 + 0.03 * seed, 100 + seed);
        const auto d2 = morph::squared_distance_transform(m);
        const auto& g = m.geometry();
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto p = g.position(i);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < m.size(); ++j)
                if (m[j]) {
                    const auto q = g.position(j);
                    double s = 0;
                    for (int a = 0; a < 3; ++a) s += double(p[a] - q[a]) * double(p[a] - q[a]);
                    best = std::min(best, s);
                }
            ASSERT_EQ(d2[i], best) << "voxel " << i;
        }
    }
    const auto none = morph::squared_distance_transform(BinaryMask(VolumeGeometry::make({3, 3, 3}), 0));
    for (double v : none.voxels()) EXPECT_TRUE(std::isinf(v));
}

TEST(Morphology, MinDistance) {
    BinaryMask a(VolumeGeometry::make({10, 10, 10}), 0), b = a;
    a.at(1, 1, 1) = 1;
    b.at(4, 5, 1) = 1;
    EXPECT_DOUBLE_EQ(morph::min_distance(a, b), 5.0);
    EXPECT_THROW(morph::min_distance(a, BinaryMask(a.geometry(), 0)), EmptyForegroundError);
}

TEST(Morphology, ScaleMaskShrinksSphere) {
    const auto s = phantom::sphere({41, 41, 41}, {20, 20, 20}, 15);
    const auto half = morph::scale_mask(s, {0.5, 0.5, 0.5}, {20, 20, 20});
    const double ratio = double(count(half)) / double(count(s));
    EXPECT_NEAR(ratio, 0.125, 0.02);
    EXPECT_EQ(morph::scale_mask(s, {1, 1, 1}, {0, 0, 0}), s);
    EXPECT_THROW(morph::scale_mask(s, {0, 1, 1}, {0, 0, 0}), ArgumentError);
    // Shrinking never creates voxels outside the original when centred inside.
    for (std::size_t i = 0; i < s.size(); ++i)
        if (half[i]) { ASSERT_TRUE(s[i]); }
}

TEST(Morphology, RoundHalfDown) {
    EXPECT_EQ(morph::round_half_down(2.5), 2);
    EXPECT_EQ(morph::round_half_down(2.51), 3);
    EXPECT_EQ(morph::round_half_down(-0.5), -1);
    EXPECT_EQ(morph::round_half_down(-0.49), 0);
}

TEST(Morphology, SmoothMaskFillsPitsAndRemovesSpurs) {
    auto cube = phantom::box({20, 20, 20}, {5, 5, 5}, {14, 14, 14});
    auto pitted = cube;
    pitted.at(9, 9, 9) = 0;
    pitted.at(17, 17, 17) = 1;
    const auto smooth = morph::smooth_mask(pitted);
    EXPECT_TRUE(smooth.at(9, 9, 9));
    EXPECT_FALSE(smooth.at(17, 17, 17));
    EXPECT_EQ(morph::smooth_mask(BinaryMask(cube.geometry(), 0)), BinaryMask(cube.geometry(), 0));
}

TEST(Morphology, CentroidOfBox) {
    const auto b = phantom::box({10, 10, 10}, {2, 3, 4}, {4, 5, 8});
    const auto c = morph::centroid(b);
    EXPECT_DOUBLE_EQ(c[0], 3);
    EXPECT_DOUBLE_EQ(c[1], 4);
    EXPECT_DOUBLE_EQ(c[2], 6);
    EXPECT_THROW(morph::centroid(BinaryMask(b.geometry(), 0)), EmptyForegroundError);
}

TEST(Morphology, SmoothMaskMatchesPaddedCloseOpenOracle) {
    const auto e = StructuringElement::face();
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto m = random_mask({8, 7, 6}, 0.3 + 0.1 * (seed % 4), 300 + seed);
        // Embed in a grid wide enough that the border never matters, then cut back out.
        BinaryMask big(VolumeGeometry::make({14, 13, 12}), 0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto p = m.geometry().position(i);
            big.at(p[0] + 3, p[1] + 3, p[2] + 3) = m[i];
        }
        const auto closed = erode_oracle(dilate_oracle(big, e), e);
        const auto opened = dilate_oracle(erode_oracle(closed, e), e);
        BinaryMask expected(m.geometry(), 0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto p = m.geometry().position(i);
            expected[i] = opened.at(p[0] + 3, p[1] + 3, p[2] + 3);
        }
        const auto s = morph::smooth_mask(m);
        ASSERT_EQ(s, expected) << "seed " << seed;
        ASSERT_EQ(morph::smooth_mask(s), s) << "not idempotent, seed " << seed;
    }
}

TEST(Morphology, FaceSpikeSurvivesFaceOpening) {
    // A one-voxel spike on a flat face keeps a face-connected supporting
    // voxel after erosion, so the face element cannot remove it.
    auto cube = phantom::box({20, 20, 20}, {5, 5, 5}, {14, 14, 14});
    cube.at(12, 12, 15) = 1;
    EXPECT_TRUE(morph::smooth_mask(cube).at(12, 12, 15));
    // A diagonal spur, touching the cube only at an edge, is removed.
    auto edge = phantom::box({20, 20, 20}, {5, 5, 5}, {14, 14, 14});
    edge.at(15, 15, 10) = 1;
    EXPECT_FALSE(morph::smooth_mask(edge).at(15, 15, 10));
}
