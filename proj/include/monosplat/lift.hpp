#pragma once

#include "monosplat/core.hpp"
#include "monosplat/image.hpp"
#include "monosplat/raster.hpp"

#include <span>

namespace monosplat {

/// Per-pixel Gaussian attributes predicted for one RGB-D view.
struct AttributeMaps {
    Image offset;          // H x W x 3, camera-frame positional offset
    Image color_residual;  // H x W x 3
    Image opacity_raw;     // H x W x 1
    Image log_scale;       // H x W x 3
    Image rotation;        // H x W x 4, (w, x, y, z)

    static constexpr int kChannels = 14;

    static AttributeMaps zeros(int height, int width);
    int height() const { return opacity_raw.height(); }
    int width() const { return opacity_raw.width(); }
    void validate(int height, int width) const;

    AttributeMaps& operator+=(const AttributeMaps& other);

    /// Packed channel view: offset(3) residual(3) opacity(1) log_scale(3) rotation(4).
    double get(int row, int col, int channel) const;
    void set(int row, int col, int channel, double value);
};

struct RgbdInput {
    Image image;  // H x W x 3 in [0, 1]
    Image depth;  // H x W x 1, > 0
    Camera camera;

    int height() const { return image.height(); }
    int width() const { return image.width(); }
    bool empty() const { return image.pixel_count() == 0; }
    void validate() const;
};

/// Camera-space point d * ((u - cx) / fx, (v - cy) / fy, 1).
Vec3 unproject(double u, double v, double d, const Camera& cam);

/// Default positional clamp: 5% of the median depth.
double default_clamp_offset(const Image& depth);

double median_of(std::span<const double> values);

/// Attribute values a fresh predictor should reproduce: no offset or residual,
/// opacity_raw = 4, isotropic scale of 1.5 pixel footprints, identity rotation.
AttributeMaps base_attribute_maps(const RgbdInput& input);

/// Gradient of the base maps' log-scale term with respect to input depth.
Image base_attribute_maps_depth_grad(const RgbdInput& input, const AttributeMaps& grad_maps);

/// One primitive per pixel, row-major, provenance (view_id, row, col).
GaussianSet lift_pixel_aligned(const RgbdInput& input, const AttributeMaps& maps, double clamp_offset,
                               int view_id = 0);

struct LiftGradients {
    AttributeMaps maps;
    Image image;  // d/d input color
    Image depth;  // d/d input depth
};

/// Reverse pass of lift_pixel_aligned for pixel-aligned gradients (one entry per pixel).
LiftGradients lift_backward(const RgbdInput& input, const AttributeMaps& maps, double clamp_offset,
                            std::span<const PrimitiveGradient> grads);

/// Turns a rendered view into an RGB-D input: color as rendered, depth
/// taken where alpha >= tau and set behind the farthest nearby solid pixel
/// elsewhere. `fallback_depth` is used if no pixel is solid.
RgbdInput rendered_view_input(const RenderTargets& render, const Camera& cam, double tau, double fallback_depth);

/// Transpose of rendered_view_input for the gradient bypass path.
RenderUpstream rendered_view_input_backward(const RenderTargets& render, double tau, const Image& grad_image,
                                            const Image& grad_depth);

} // namespace monosplat
