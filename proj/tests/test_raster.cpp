#include "monosplat/aggregate.hpp"
#include "monosplat/fixtures.hpp"
#include "monosplat/gradcheck.hpp"
#include "monosplat/lift.hpp"
#include "monosplat/raster.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace monosplat;
using namespace monosplat::testing;

namespace {

Camera small_camera(int size = 5) { return Camera::centered(size, size, size); }

GaussianSet one(const GaussianPrimitive& p) {
    GaussianSet s;
    s.push_back(p, {0, 0, 0});
    return s;
}

} // namespace

TEST(Project, OpticalAxisLandsOnPrincipalPoint) {
    const Camera cam = Camera::centered(32, 24, 30);
    const auto proj = project(one(splat_at(Vec3(0, 0, 4), Vec3::Zero(), 0, -2)), cam);
    ASSERT_EQ(proj.size(), 1u);
    EXPECT_NEAR(proj[0].mean2d.x(), cam.cx, 1e-12);
    EXPECT_NEAR(proj[0].mean2d.y(), cam.cy, 1e-12);
    EXPECT_DOUBLE_EQ(proj[0].camera_depth, 4.0);
}

TEST(Project, IsotropicCovarianceMatchesNumericalJacobian) {
    Camera cam = Camera::centered(64, 64, 50);
    cam.fy = 60;
    const Vec3 mean(0.3, -0.2, 3.0);
    const double sigma = 0.05;
    const auto proj = project(one(splat_at(mean, Vec3::Zero(), 0, std::log(sigma))), cam);
    ASSERT_EQ(proj.size(), 1u);
    auto pix = [&](const Vec3& p) { return Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy); };
    Eigen::Matrix<double, 2, 3> jac;
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Vec3 dp = Vec3::Zero();
        dp[k] = h;
        jac.col(k) = (pix(mean + dp) - pix(mean - dp)) / (2 * h);
    }
    const Mat2 oracle = jac * (sigma * sigma * Mat3::Identity()) * jac.transpose() + 0.3 * Mat2::Identity();
    EXPECT_LT((proj[0].cov2d - oracle).cwiseAbs().maxCoeff(), 1e-6);
    const double d = mean.z();
    EXPECT_NEAR(proj[0].cov2d(0, 0), std::pow(cam.fx * sigma / d, 2) + 0.3, 0.05);
}

TEST(Project, CullsBehindCamera) {
    GaussianSet s = one(splat_at(Vec3(0, 0, -1), Vec3::Zero(), 0, -2));
    s.push_back(splat_at(Vec3(0, 0, 0.005), Vec3::Zero(), 0, -2), {0, 0, 0});
    EXPECT_TRUE(project(s, small_camera()).empty());
}

TEST(Rasterize, SingleOpaqueSplatAtCap) {
    const Camera cam = small_camera();
    const Vec3 c(0.2, 0.6, 0.9);
    const RenderTargets r = rasterize(one(splat_at(Vec3(0, 0, 2), c, 30, -1)), cam, c);
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(r.color.at(2, 2, ch), c[ch], 1e-12);
    EXPECT_NEAR(r.alpha.at(2, 2), raster_constants::kMaxAlpha, 1e-12);
    EXPECT_NEAR(r.depth.at(2, 2), 2.0, 1e-7);
}

TEST(Rasterize, TwoCoincidentHalfSplats) {
    const Camera cam = small_camera();
    const Vec3 c1(1, 0, 0), c2(0, 1, 0);
    GaussianSet s = one(splat_at(Vec3(0, 0, 2), c1, 0.0, -3));
    s.push_back(splat_at(Vec3(0, 0, 2.5), c2, 0.0, -3), {0, 0, 0});
    const RenderTargets r = rasterize(s, cam, Vec3::Zero());
    const Vec3 expected = 0.5 * c1 + 0.25 * c2;
    for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(r.color.at(2, 2, ch), expected[ch], 1e-12);
    EXPECT_NEAR(r.alpha.at(2, 2), 0.75, 1e-12);
}

TEST(Rasterize, EmptySetGivesBackground) {
    const Vec3 bg(0.1, 0.2, 0.3);
    for (const auto& r : {rasterize({}, small_camera(), bg), rasterize_reference({}, small_camera(), bg)}) {
        for (int v = 0; v < 5; ++v)
            for (int u = 0; u < 5; ++u) {
                for (int c = 0; c < 3; ++c) EXPECT_EQ(r.color.at(v, u, c), bg[c]);
                EXPECT_EQ(r.alpha.at(v, u), 0.0);
                EXPECT_EQ(r.depth.at(v, u), 0.0);
            }
    }
}

TEST(Rasterize, MatchesReferenceOnRandomScenes) {
    std::mt19937_64 rng(11);
    const Camera cam = Camera::centered(64, 48, 60);
    RandomSceneOptions opt;
    for (int i = 0; i < 10; ++i) {
        const GaussianSet s = random_scene(cam, opt, rng);
        const Vec3 bg(0.3, 0.5, 0.7);
        const RenderTargets a = rasterize(s, cam, bg), b = rasterize_reference(s, cam, bg);
        EXPECT_LT(max_abs_diff(a.color, b.color), 1e-5);
        EXPECT_LT(max_abs_diff(a.depth, b.depth), 1e-5);
        EXPECT_LT(max_abs_diff(a.alpha, b.alpha), 1e-5);
    }
    const GaussianSet single = one(splat_at(Vec3(0.1, 0, 3), Vec3(1, 0.5, 0), 1.0, -2));
    EXPECT_EQ(max_abs_diff(rasterize(single, cam, Vec3::Zero()).color,
                           rasterize_reference(single, cam, Vec3::Zero()).color),
              0.0);
}

TEST(RasterizeProperty, OutputsFiniteAndBounded) {
    std::mt19937_64 rng(12);
    const Camera cam = Camera::centered(40, 40, 40);
    for (int i = 0; i < 10; ++i) {
        const RenderTargets r = rasterize(random_scene(cam, {}, rng), cam, Vec3::Zero());
        for (std::size_t k = 0; k < r.alpha.size(); ++k) {
            const double a = r.alpha.data()[k];
            EXPECT_TRUE(a >= 0.0 && a <= 1.0);
            EXPECT_TRUE(std::isfinite(r.depth.data()[k]));
            if (a > 0.0) {
                EXPECT_GE(r.depth.data()[k], 0.0);
            }
        }
    }
}

TEST(RasterizeProperty, ConcatNeverReducesAlpha) {
    std::mt19937_64 rng(13);
    const Camera cam = Camera::centered(48, 48, 48);
    for (int i = 0; i < 10; ++i) {
        const GaussianSet a = random_scene(cam, {}, rng), b = random_scene(cam, {}, rng);
        const Image alpha_a = rasterize(a, cam, Vec3::Zero()).alpha;
        const Image alpha_ab = rasterize(concat(a, b), cam, Vec3::Zero()).alpha;
        for (std::size_t k = 0; k < alpha_a.size(); ++k) EXPECT_GE(alpha_ab.data()[k], alpha_a.data()[k] - 1e-6);
    }
}

TEST(RasterizeProperty, BackgroundCompositedAgainstResidualTransmittance) {
    std::mt19937_64 rng(14);
    const Camera cam = Camera::centered(40, 40, 40);
    const Vec3 bg(0.9, 0.4, 0.1);
    for (int i = 0; i < 5; ++i) {
        const GaussianSet s = random_scene(cam, {}, rng);
        const RenderTargets fg = rasterize(s, cam, Vec3::Zero()), full = rasterize(s, cam, bg);
        for (int v = 0; v < 40; ++v)
            for (int u = 0; u < 40; ++u)
                for (int c = 0; c < 3; ++c)
                    EXPECT_NEAR(full.color.at(v, u, c), fg.color.at(v, u, c) + (1 - fg.alpha.at(v, u)) * bg[c],
                                1e-12);
    }
}

TEST(RasterizeProperty, IndependentOfWorkerCount) {
    std::mt19937_64 rng(15);
    const Camera cam = Camera::centered(64, 64, 64);
    const GaussianSet s = random_scene(cam, {}, rng);
    RenderUpstream up = RenderUpstream::zeros(64, 64);
    up.color = random_image(64, 64, 3, rng, -1, 1);
    setenv("MONOSPLAT_WORKERS", "1", 1);
    const RenderTargets a = rasterize(s, cam, Vec3::Zero());
    const GradientBuffer ga = rasterize_backward(s, cam, Vec3::Zero(), up);
    setenv("MONOSPLAT_WORKERS", "3", 1);
    const RenderTargets b = rasterize(s, cam, Vec3::Zero());
    const GradientBuffer gb = rasterize_backward(s, cam, Vec3::Zero(), up);
    unsetenv("MONOSPLAT_WORKERS");
    EXPECT_EQ(max_abs_diff(a.color, b.color), 0.0);
    for (std::size_t i = 0; i < ga.size(); ++i)
        for (int k = 0; k < 14; ++k) EXPECT_NEAR(gradient_parameter(ga[i], k), gradient_parameter(gb[i], k), 1e-9);
}

TEST(Normals, FrontoParallelPlaneFacesCamera) {
    const Camera cam = Camera::centered(16, 12, 14);
    const Image n = normals_from_depth(Image(12, 16, 1, 2.5), cam);
    for (int v = 0; v < 12; ++v)
        for (int u = 0; u < 16; ++u) {
            EXPECT_NEAR(n.at(v, u, 0), 0.0, 1e-12);
            EXPECT_NEAR(n.at(v, u, 1), 0.0, 1e-12);
            EXPECT_NEAR(n.at(v, u, 2), -1.0, 1e-12);
        }
}

TEST(Normals, TiltedPlaneMatchesAnalyticNormal) {
    const Camera cam = Camera::centered(20, 20, 18);
    const Vec3 plane_n = Vec3(0.3, -0.2, -1.0).normalized();  // faces the camera
    const double offset = -3.0;                              // plane: n . X = offset
    Image depth(20, 20, 1);
    for (int v = 0; v < 20; ++v)
        for (int u = 0; u < 20; ++u) {
            const Vec3 ray = unproject(u, v, 1.0, cam);
            depth.at(v, u) = offset / plane_n.dot(ray);
        }
    const Image n = normals_from_depth(depth, cam);
    for (int v = 0; v < 20; ++v)
        for (int u = 0; u < 20; ++u)
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(n.at(v, u, c), plane_n[c], 1e-9);
}

TEST(Normals, SinglePixelFallsBackToViewDirection) {
    const Camera cam = Camera::centered(1, 1, 1);
    const Image n = normals_from_depth(Image(1, 1, 1, 2.0), cam);
    const Vec3 vd = view_direction(cam, 0, 0);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(n.at(0, 0, c), vd[c], 1e-12);
}

TEST(Normals, UnitLength) {
    std::mt19937_64 rng(16);
    const Camera cam = Camera::centered(24, 24, 24);
    const Image n = normals_from_depth(random_image(24, 24, 1, rng, 1.0, 3.0), cam);
    for (int v = 0; v < 24; ++v)
        for (int u = 0; u < 24; ++u)
            EXPECT_NEAR(Vec3(n.at(v, u, 0), n.at(v, u, 1), n.at(v, u, 2)).norm(), 1.0, 1e-9);
}

TEST(ViewDirections, PointTowardCamera) {
    const Camera cam = Camera::centered(9, 9, 9);
    const Vec3 center = view_direction(cam, 4, 4);
    EXPECT_NEAR(center.z(), -1.0, 1e-12);
    const Vec3 corner = view_direction(cam, 0, 0);
    EXPECT_NEAR(corner.norm(), 1.0, 1e-12);
    EXPECT_GT(corner.x(), 0.0);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
    std::mt19937_64 rng(17);
    const Camera cam = Camera::centered(32, 32, 32);
    const GaussianSet s = random_scene(cam, {}, rng);
    const GradientBuffer g = rasterize_backward(s, cam, Vec3(0.5, 0.5, 0.5), RenderUpstream::zeros(32, 32));
    ASSERT_EQ(g.size(), s.size());
    for (const auto& p : g) EXPECT_TRUE(p.is_zero());
}

TEST(Backward, SingleSplatAlphaPixelMatchesDifferences) {
    const Camera cam = Camera::centered(9, 9, 9);
    GaussianSet s = one(splat_at(Vec3(0.05, -0.02, 2), Vec3(0.5, 0.5, 0.5), 0.3, -1.8));
    RenderUpstream up = RenderUpstream::zeros(9, 9);
    up.alpha.at(5, 3) = 1.0;
    const double analytic = rasterize_backward(s, cam, Vec3::Zero(), up)[0].opacity_raw;
    const double h = 1e-4;
    double& o = s.primitives[0].opacity_raw;
    o += h;
    const double plus = rasterize(s, cam, Vec3::Zero()).alpha.at(5, 3);
    o -= 2 * h;
    const double minus = rasterize(s, cam, Vec3::Zero()).alpha.at(5, 3);
    EXPECT_LT(relative_error(analytic, (plus - minus) / (2 * h)), 1e-3);
}

TEST(Backward, CulledPrimitiveHasZeroGradient) {
    const Camera cam = Camera::centered(16, 16, 16);
    GaussianSet s = one(splat_at(Vec3(0, 0, 2), Vec3(1, 0, 0), 1, -2));
    s.push_back(splat_at(Vec3(0, 0, -2), Vec3(0, 1, 0), 1, -2), {0, 0, 1});
    RenderUpstream up = RenderUpstream::zeros(16, 16);
    up.color.fill(1.0);
    up.alpha.fill(1.0);
    const GradientBuffer g = rasterize_backward(s, cam, Vec3::Zero(), up);
    EXPECT_FALSE(g[0].is_zero());
    EXPECT_TRUE(g[1].is_zero());
}

TEST(Backward, DimensionMismatchThrows) {
    const Camera cam = Camera::centered(16, 16, 16);
    EXPECT_THROW(rasterize_backward({}, cam, Vec3::Zero(), RenderUpstream::zeros(8, 16)), std::invalid_argument);
}

TEST(Backward, FiniteDifferencesOnRandomScenes) {
    GradcheckOptions opt;
    opt.scenes = 3;
    opt.primitives = 20;
    opt.size = 32;
    const GradcheckReport r = run_raster_gradcheck(21, opt);
    EXPECT_TRUE(r.passed()) << r.failures.size() << " failures, worst " << r.worst_relative_error;
    EXPECT_GT(r.position, 0);
    EXPECT_GT(r.color, 0);
    EXPECT_GT(r.opacity, 0);
    EXPECT_GT(r.scale, 0);
    EXPECT_GT(r.rotation, 0);
}
