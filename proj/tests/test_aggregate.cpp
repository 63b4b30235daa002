#include "monosplat/aggregate.hpp"
#include "monosplat/fixtures.hpp"
#include "monosplat/metrics.hpp"
#include "monosplat/predictor.hpp"
#include "monosplat/train.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace monosplat;
using namespace monosplat::testing;

namespace {

constexpr double kTau = 0.5;

Image constant(int h, int w, double v) { return Image(h, w, 1, v); }

struct OccluderCase {
    RgbdInput scene = occluder_scene(32, 0);
    DirectFit model{1, 32, 32};
    Camera cam1;
    GaussianSet gs0, gs1;

    OccluderCase() {
        cam1 = orbit_camera(scene.camera, orbit_pivot(scene.camera, scene.depth), degrees_to_radians(30.0), 0.0);
        const InferenceResult r = inference_aggregate_full(scene, model, {0, 0}, cam1, kTau, Vec3::Zero());
        gs0 = r.gs0;
        gs1 = r.gs1;
    }
};

} // namespace

TEST(Binarize, Thresholds) {
    EXPECT_EQ(binarize_alpha(constant(3, 4, 0.0), kTau).popcount(), 12u);
    EXPECT_EQ(binarize_alpha(constant(3, 4, 1.0), kTau).popcount(), 0u);
    EXPECT_EQ(binarize_alpha(constant(3, 4, 0.5), kTau).popcount(), 0u);
    EXPECT_EQ(binarize_alpha(constant(3, 4, std::nextafter(0.5, 0.0)), kTau).popcount(), 12u);
}

TEST(ComplementaryMasks, FullTruthTable) {
    // One pixel per (recipient alpha, donor alpha) combination on each grid.
    const double lo = 0.1, hi = 0.9;
    Image a01(1, 4, 1), a11(1, 4, 1), a00(1, 4, 1), a10(1, 4, 1);
    const double rec[4] = {lo, lo, hi, hi}, don[4] = {hi, lo, hi, lo};
    for (int u = 0; u < 4; ++u) {
        a01.at(0, u) = rec[u];
        a11.at(0, u) = don[u];
        a10.at(0, u) = rec[u];
        a00.at(0, u) = don[u];
    }
    const ComplementaryMasks m = complementary_masks(a00, a01, a10, a11, kTau);
    const bool expected[4] = {true, false, false, false};
    for (int u = 0; u < 4; ++u) {
        EXPECT_EQ(m.donor_1to0.at(0, u), expected[u]);
        EXPECT_EQ(m.donor_0to1.at(0, u), expected[u]);
    }
    EXPECT_EQ(m.donor_1to0.grid_view, 1);
    EXPECT_EQ(m.donor_0to1.grid_view, 0);
}

TEST(ComplementaryMasks, GridMismatchThrows) {
    EXPECT_THROW(complementary_masks(constant(2, 2, 0), constant(2, 2, 0), constant(3, 2, 0), constant(2, 2, 0), kTau),
                 std::invalid_argument);
    EXPECT_THROW(complementary_masks(constant(2, 2, 0), constant(2, 2, 0), constant(2, 2, 0), constant(2, 3, 0), kTau),
                 std::invalid_argument);
}

TEST(ComplementaryMasksProperty, RolesAreDisjoint) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const Image a = random_image(8, 8, 1, rng), b = random_image(8, 8, 1, rng);
        // Same grid, roles swapped: recipient-hole/donor-solid vs donor-hole/recipient-solid.
        const BinaryMask m = complementary_masks(b, a, a, b, kTau).donor_1to0;
        const BinaryMask swapped = complementary_masks(a, b, b, a, kTau).donor_1to0;
        for (std::size_t k = 0; k < m.values.size(); ++k) EXPECT_FALSE(m.values[k] && swapped.values[k]);
    }
}

TEST(Select, AllNoneAndSinglePixel) {
    RgbdInput in;
    in.camera = Camera::centered(2, 2, 2);
    in.image = Image(2, 2, 3, 0.5);
    in.depth = Image(2, 2, 1, 1.0);
    const GaussianSet s = lift_pixel_aligned(in, base_attribute_maps(in), 0.05);
    EXPECT_EQ(select_primitives(s, BinaryMask(2, 2, 0, true)).primitives, s.primitives);
    EXPECT_TRUE(select_primitives(s, BinaryMask(2, 2, 0, false)).empty());
    BinaryMask m(2, 2, 0);
    m.set(0, 0, true);
    const GaussianSet one = select_primitives(s, m);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.provenance[0], (Provenance{0, 0, 0}));
}

TEST(Select, RejectsNonPixelAlignedSets) {
    GaussianSet s;
    for (int i = 0; i < 5; ++i) s.push_back(GaussianPrimitive{}, {0, 0, 0});
    EXPECT_THROW(select_primitives(s, BinaryMask(2, 2, 0, true)), std::invalid_argument);
    GaussianSet other_view;
    other_view.push_back(GaussianPrimitive{}, {1, 0, 0});
    EXPECT_THROW(select_primitives(other_view, BinaryMask(2, 2, 0, true)), std::invalid_argument);
}

TEST(Concat, IdentityAndSize) {
    GaussianSet x;
    x.push_back(GaussianPrimitive{}, {0, 0, 0});
    x.push_back(GaussianPrimitive{}, {0, 0, 1});
    EXPECT_EQ(concat(x, {}).primitives, x.primitives);
    EXPECT_EQ(concat(x, x).size(), 4u);
}

TEST(AggregatePair, EmptyDonorSet) {
    const OccluderCase c;
    const AggregatedPair p = aggregate_pair(c.gs0, {}, c.scene.camera, c.cam1, kTau, Vec3::Zero());
    EXPECT_EQ(p.view0.merged_set.primitives, c.gs0.primitives);
    EXPECT_EQ(p.view0.donor_count, 0u);
    const GaussianSet expected = select_primitives(c.gs0, p.view1.mask_0to1);
    EXPECT_EQ(p.view1.merged_set.primitives, expected.primitives);
}

TEST(AggregatePair, FullCoverageHasNoDonors) {
    const RgbdInput scene = smooth_scene(32, 0);
    const DirectFit model(1, 32, 32);
    const GaussianSet gs0 = lift_pixel_aligned(scene, model.predict(scene, {0, 0}), 0.15, 0);
    const GaussianSet gs1 = lift_pixel_aligned(scene, model.predict(scene, {0, 0}), 0.15, 1);
    const AggregatedPair p = aggregate_pair(gs0, gs1, scene.camera, scene.camera, kTau, Vec3::Zero());
    EXPECT_EQ(p.view0.donor_count, 0u);
    EXPECT_EQ(p.view1.donor_count, 0u);
}

TEST(AggregatePair, OccluderHolesReceiveDonors) {
    const OccluderCase c;
    const AggregatedPair p = aggregate_pair(c.gs0, c.gs1, c.scene.camera, c.cam1, kTau, Vec3::Zero());
    const Image a01 = rasterize(c.gs0, c.cam1, Vec3::Zero()).alpha;
    const Image a11 = rasterize(c.gs1, c.cam1, Vec3::Zero()).alpha;
    const Image merged = rasterize(p.view0.merged_set, c.cam1, Vec3::Zero()).alpha;
    double sum = 0.0;
    int count = 0;
    for (int v = 0; v < 32; ++v)
        for (int u = 0; u < 32; ++u) {
            if (!(a01.at(v, u) < kTau && a11.at(v, u) >= kTau)) continue;
            EXPECT_TRUE(p.view0.mask_1to0.at(v, u));
            sum += merged.at(v, u);
            ++count;
        }
    ASSERT_GT(count, 0);
    EXPECT_GT(sum / count, kTau);
    EXPECT_EQ(p.view0.merged_set.size(), c.gs0.size() + p.view0.donor_count);
    EXPECT_EQ(p.view0.donor_count, p.view0.mask_1to0.popcount());
}

TEST(AggregatePair, Deterministic) {
    const OccluderCase c;
    const AggregatedPair a = aggregate_pair(c.gs0, c.gs1, c.scene.camera, c.cam1, kTau, Vec3::Zero());
    const AggregatedPair b = aggregate_pair(c.gs0, c.gs1, c.scene.camera, c.cam1, kTau, Vec3::Zero());
    EXPECT_EQ(a.view0.merged_set.primitives, b.view0.merged_set.primitives);
    EXPECT_EQ(a.view1.merged_set.primitives, b.view1.merged_set.primitives);
    EXPECT_EQ(a.view0.mask_1to0, b.view0.mask_1to0);
}

TEST(AggregatePairProperty, DonorIndependentRegionUnchanged) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const RgbdInput scene = occluder_scene(32, seed);
        const DirectFit model(1, 32, 32);
        for (double yaw : {-0.52, -0.2, 0.3, 0.52}) {
            const Camera cam1 = orbit_camera(scene.camera, orbit_pivot(scene.camera, scene.depth), yaw, 0.0);
            const InferenceResult r = inference_aggregate_full(scene, model, {0, 0}, cam1, kTau, Vec3::Zero());
            const RenderTargets before = rasterize(r.gs0, scene.camera, Vec3::Zero());
            const RenderTargets after = rasterize(r.merged(), scene.camera, Vec3::Zero());
            for (int v = 0; v < 32; ++v)
                for (int u = 0; u < 32; ++u) {
                    if (!(before.alpha.at(v, u) >= kTau) || r.pair.view0.mask_0to1.at(v, u)) continue;
                    for (int c = 0; c < 3; ++c)
                        EXPECT_LT(std::abs(after.color.at(v, u, c) - before.color.at(v, u, c)), 5.0 / 255.0)
                            << "seed " << seed << " yaw " << yaw << " at " << v << "," << u;
                }
        }
    }
}

TEST(InferenceAggregate, CanonicalCameraReproducesCanonicalRender) {
    const RgbdInput scene = smooth_scene(32, 0);
    const DirectFit model(1, 32, 32);
    const GaussianSet gs0 = lift_pixel_aligned(scene, model.predict(scene, {0, 0}), default_clamp_offset(scene.depth));
    const GaussianSet merged = inference_aggregate(scene, model, {0, 0}, scene.camera, kTau, Vec3::Zero());
    const Image a = rasterize(gs0, scene.camera, Vec3::Zero()).color;
    const Image b = rasterize(merged, scene.camera, Vec3::Zero()).color;
    double mae = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mae += std::abs(a.data()[i] - b.data()[i]);
    EXPECT_LT(mae / static_cast<double>(a.size()), 3.0 / 255.0);
}

TEST(InferenceAggregate, EmptySceneIsPassedThrough) {
    const DirectFit model(1, 8, 8);
    RgbdInput empty;
    EXPECT_TRUE(inference_aggregate(empty, model, {0, 0}, Camera{}, kTau, Vec3::Zero()).empty());
}

TEST(InferenceAggregate, OccluderHoleCoverageDecreases) {
    const OccluderCase c;
    const GaussianSet merged = inference_aggregate(c.scene, c.model, {0, 0}, c.cam1, kTau, Vec3::Zero());
    const double before = hole_coverage(rasterize(c.gs0, c.cam1, Vec3::Zero()).alpha, kTau);
    const double after = hole_coverage(rasterize(merged, c.cam1, Vec3::Zero()).alpha, kTau);
    EXPECT_GT(before, 0.0);
    EXPECT_LT(after, before);
}

TEST(ScatterByProvenance, RoutesGradientsToSourcePixels) {
    GaussianSet merged;
    merged.push_back(GaussianPrimitive{}, {0, 0, 1});
    merged.push_back(GaussianPrimitive{}, {1, 1, 0});
    merged.push_back(GaussianPrimitive{}, {0, 1, 1});
    GradientBuffer g(3);
    g[0].opacity_raw = 1;
    g[1].opacity_raw = 2;
    g[2].opacity_raw = 3;
    GradientBuffer out0(4), out1(4);
    scatter_by_provenance(merged, g, 0, 2, out0);
    scatter_by_provenance(merged, g, 1, 2, out1);
    EXPECT_EQ(out0[1].opacity_raw, 1);
    EXPECT_EQ(out0[3].opacity_raw, 3);
    EXPECT_EQ(out1[2].opacity_raw, 2);
    EXPECT_EQ(out1[0].opacity_raw, 0);
}
