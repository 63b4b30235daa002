#pragma once

#include "monosplat/core.hpp"
#include "monosplat/image.hpp"

#include <vector>

namespace monosplat {

namespace raster_constants {
inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPassDilation = 0.3;
inline constexpr double kMaxAlpha = 0.99;
/// Splat contributions below this are dropped; also sets the splat footprint.
inline constexpr double kMinAlpha = 1e-14;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kDepthEpsilon = 1e-8;
inline constexpr int kTileSize = 16;
} // namespace raster_constants

/// Screen-space footprint of one surviving primitive.
struct ProjectedGaussian {
    int index = -1;              // primitive index in the source set
    Vec2 mean2d = Vec2::Zero();  // pixels
    Mat2 cov2d = Mat2::Identity();
    Vec3 conic = Vec3::Zero();   // inverse cov2d as (a, b, c): [[a, b], [b, c]]
    double camera_depth = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    double max_power = 0.0;      // largest Mahalanobis distance that can reach kMinAlpha
    int min_x = 0, max_x = -1, min_y = 0, max_y = -1;  // inclusive pixel bounding box
};

struct RenderTargets {
    Image color;  // H x W x 3
    Image depth;  // H x W x 1, alpha-normalized expected depth
    Image alpha;  // H x W x 1
};

/// Per-pixel partial derivatives of a scalar loss with respect to the render.
struct RenderUpstream {
    Image color;
    Image depth;
    Image alpha;

    static RenderUpstream zeros(int height, int width);
    RenderUpstream& operator+=(const RenderUpstream& other);
};

/// Partial derivatives with respect to the raw (pre-activation) attributes.
struct PrimitiveGradient {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();
    double opacity_raw = 0.0;
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();

    PrimitiveGradient& operator+=(const PrimitiveGradient& o);
    bool is_zero() const;
    bool all_finite() const;
};

using GradientBuffer = std::vector<PrimitiveGradient>;

/// EWA projection with near-plane culling. Primitives that cannot affect any
/// pixel of the camera's image are dropped as well.
std::vector<ProjectedGaussian> project(const GaussianSet& set, const Camera& cam);

/// Tile-based front-to-back compositing.
RenderTargets rasterize(const GaussianSet& set, const Camera& cam, const Vec3& background);

/// Naive per-pixel evaluation over one globally depth-sorted list. Test oracle.
RenderTargets rasterize_reference(const GaussianSet& set, const Camera& cam, const Vec3& background);

/// Reverse-mode pass; returns one gradient per primitive of `set`.
GradientBuffer rasterize_backward(const GaussianSet& set, const Camera& cam, const Vec3& background,
                                  const RenderUpstream& upstream);

/// Unit ray direction from the pixel back toward the camera, camera frame.
Vec3 view_direction(const Camera& cam, double u, double v);
Image view_directions(const Camera& cam);

/// Camera-facing normals from central differences of the unprojected depth.
Image normals_from_depth(const Image& depth, const Camera& cam);

} // namespace monosplat
