#pragma once

#include "monosplat/core.hpp"
#include "monosplat/image.hpp"
#include "monosplat/raster.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace monosplat::testing {

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline Image random_image(int h, int w, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Image img(h, w, c);
    for (double& x : img.data()) x = d(rng);
    return img;
}

/// Splat with an isotropic footprint at camera-frame point `p`.
inline GaussianPrimitive splat_at(const Vec3& p, const Vec3& color, double opacity_raw, double log_scale) {
    GaussianPrimitive g;
    g.position = p;
    g.color = color;
    g.opacity_raw = opacity_raw;
    g.log_scale = Vec3::Constant(log_scale);
    return g;
}

inline double dot(const RenderTargets& r, const RenderUpstream& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.color.size(); ++i) s += r.color.data()[i] * w.color.data()[i];
    for (std::size_t i = 0; i < r.depth.size(); ++i) s += r.depth.data()[i] * w.depth.data()[i];
    for (std::size_t i = 0; i < r.alpha.size(); ++i) s += r.alpha.data()[i] * w.alpha.data()[i];
    return s;
}

inline double relative_error(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

} // namespace monosplat::testing
