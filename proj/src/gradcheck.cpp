#include "monosplat/gradcheck.hpp"

#include "monosplat/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace monosplat {

double& primitive_parameter(GaussianPrimitive& p, int k) {
    if (k < 3) return p.position[k];
    if (k < 6) return p.color[k - 3];
    if (k < 7) return p.opacity_raw;
    if (k < 10) return p.log_scale[k - 7];
    return p.rotation[k - 10];
}

double gradient_parameter(const PrimitiveGradient& g, int k) {
    if (k < 3) return g.position[k];
    if (k < 6) return g.color[k - 3];
    if (k < 7) return g.opacity_raw;
    if (k < 10) return g.log_scale[k - 7];
    return g.rotation[k - 10];
}

const char* parameter_name(int k) {
    static const char* names[14] = {"position.x", "position.y", "position.z", "color.r",     "color.g",
                                    "color.b",    "opacity_raw", "log_scale.x", "log_scale.y", "log_scale.z",
                                    "rotation.w", "rotation.x", "rotation.y",  "rotation.z"};
    return names[k];
}

namespace {

double linear_functional(const RenderTargets& r, const RenderUpstream& w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < r.color.size(); ++i) sum += r.color.data()[i] * w.color.data()[i];
    for (std::size_t i = 0; i < r.depth.size(); ++i) sum += r.depth.data()[i] * w.depth.data()[i];
    for (std::size_t i = 0; i < r.alpha.size(); ++i) sum += r.alpha.data()[i] * w.alpha.data()[i];
    return sum;
}

constexpr double kMaxCheckedAlpha = 0.999;
constexpr double kMinDepthWeightAlpha = 0.05;

double max_alpha(const RenderTargets& r) {
    double m = 0.0;
    for (double a : r.alpha.data()) m = std::max(m, a);
    return m;
}

} // namespace

GradcheckReport run_raster_gradcheck(std::uint64_t seed, const GradcheckOptions& opt) {
    GradcheckReport report;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight(-1.0, 1.0);
    Camera cam = Camera::centered(opt.size, opt.size, opt.size);
    for (int s = 0; s < opt.scenes; ++s) {
        RandomSceneOptions scene_opt;
        scene_opt.count = opt.primitives;
        GaussianSet set = random_scene(cam, scene_opt, rng);
        // Redraw scenes that reach the transmittance cutoff: the render is
        // discontinuous there and differences are meaningless.
        while (max_alpha(rasterize(set, cam, Vec3::Zero())) > kMaxCheckedAlpha) set = random_scene(cam, scene_opt, rng);
        const Vec3 background(weight(rng) * 0.5 + 0.5, weight(rng) * 0.5 + 0.5, weight(rng) * 0.5 + 0.5);
        RenderUpstream w = RenderUpstream::zeros(opt.size, opt.size);
        for (double& x : w.color.data()) x = weight(rng);
        // Normalized depth amplifies the footprint cutoff where alpha is tiny,
        // so depth is only weighted on pixels with visible coverage.
        const RenderTargets base = rasterize(set, cam, background);
        for (std::size_t i = 0; i < w.depth.size(); ++i)
            w.depth.data()[i] = base.alpha.data()[i] >= kMinDepthWeightAlpha ? 0.1 * weight(rng) : 0.0;
        for (double& x : w.alpha.data()) x = weight(rng);

        const GradientBuffer analytic = rasterize_backward(set, cam, background, w);
        for (std::size_t i = 0; i < set.size(); ++i) {
            for (int k = 0; k < 14; ++k) {
                const double a = gradient_parameter(analytic[i], k);
                if (std::abs(a) <= opt.min_magnitude) {
                    ++report.skipped;
                    continue;
                }
                double& param = primitive_parameter(set.primitives[i], k);
                const double saved = param;
                param = saved + opt.step;
                const double plus = linear_functional(rasterize(set, cam, background), w);
                param = saved - opt.step;
                const double minus = linear_functional(rasterize(set, cam, background), w);
                param = saved;
                const double numeric = (plus - minus) / (2.0 * opt.step);
                const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
                ++report.checked;
                report.worst_relative_error = std::max(report.worst_relative_error, rel);
                if (k < 3) ++report.position;
                else if (k < 6) ++report.color;
                else if (k < 7) ++report.opacity;
                else if (k < 10) ++report.scale;
                else ++report.rotation;
                if (!(rel < opt.rel_tolerance)) {
                    report.failures.push_back({s, static_cast<int>(i), parameter_name(k), a, numeric});
                }
            }
        }
    }
    return report;
}

} // namespace monosplat
