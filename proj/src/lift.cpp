#include "monosplat/lift.hpp"


#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace monosplat {

AttributeMaps AttributeMaps::zeros(int height, int width) {
    return {Image(height, width, 3), Image(height, width, 3), Image(height, width, 1), Image(height, width, 3),
            Image(height, width, 4)};
}

void AttributeMaps::validate(int height, int width) const {
    auto check = [&](const Image& img, int channels, const char* name) {
        if (img.height() != height || img.width() != width || img.channels() != channels) {
            throw std::invalid_argument(std::string("AttributeMaps: ") + name + " has shape " + img.shape_string() +
                                        ", expected " + std::to_string(height) + "x" + std::to_string(width) + "x" +
                                        std::to_string(channels));
        }
        for (double x : img.data())
            if (!std::isfinite(x)) throw std::invalid_argument(std::string("AttributeMaps: non-finite ") + name);
    };
    check(offset, 3, "offset");
    check(color_residual, 3, "color_residual");
    check(opacity_raw, 1, "opacity_raw");
    check(log_scale, 3, "log_scale");
    check(rotation, 4, "rotation");
}

AttributeMaps& AttributeMaps::operator+=(const AttributeMaps& o) {
    offset += o.offset;
    color_residual += o.color_residual;
    opacity_raw += o.opacity_raw;
    log_scale += o.log_scale;
    rotation += o.rotation;
    return *this;
}

double AttributeMaps::get(int row, int col, int ch) const {
    if (ch < 3) return offset.at(row, col, ch);
    if (ch < 6) return color_residual.at(row, col, ch - 3);
    if (ch < 7) return opacity_raw.at(row, col);
    if (ch < 10) return log_scale.at(row, col, ch - 7);
    return rotation.at(row, col, ch - 10);
}

void AttributeMaps::set(int row, int col, int ch, double value) {
    if (ch < 3) offset.at(row, col, ch) = value;
    else if (ch < 6) color_residual.at(row, col, ch - 3) = value;
    else if (ch < 7) opacity_raw.at(row, col) = value;
    else if (ch < 10) log_scale.at(row, col, ch - 7) = value;
    else rotation.at(row, col, ch - 10) = value;
}

void RgbdInput::validate() const {
    if (image.channels() != 3 && !image.empty()) throw std::invalid_argument("RgbdInput: image must have 3 channels");
    if (!image.same_grid(depth) || (depth.channels() != 1 && !depth.empty())) {
        throw std::invalid_argument("RgbdInput: image and depth dimensions differ");
    }
    if (empty()) return;
    camera.validate();
    if (camera.width != image.width() || camera.height != image.height()) {
        throw std::invalid_argument("RgbdInput: camera resolution does not match the image");
    }
    for (double d : depth.data())
        if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("RgbdInput: depth must be positive and finite");
}

Vec3 unproject(double u, double v, double d, const Camera& cam) {
    if (!(d > 0.0)) throw std::invalid_argument("unproject: depth must be positive");
    return Vec3(d * (u - cam.cx) / cam.fx, d * (v - cam.cy) / cam.fy, d);
}

double median_of(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("median_of: empty input");
    std::vector<double> tmp(values.begin(), values.end());
    const std::size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
    return tmp[mid];
}

double default_clamp_offset(const Image& depth) { return 0.05 * median_of(depth.data()); }

namespace {
double pixel_footprint_scale(const Camera& cam) { return 1.5 / std::sqrt(cam.fx * cam.fy); }
} // namespace

AttributeMaps base_attribute_maps(const RgbdInput& input) {
    const int h = input.height(), w = input.width();
    AttributeMaps maps = AttributeMaps::zeros(h, w);
    const double k = pixel_footprint_scale(input.camera);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            maps.opacity_raw.at(v, u) = 4.0;
            const double ls = std::log(k * input.depth.at(v, u));
            for (int c = 0; c < 3; ++c) maps.log_scale.at(v, u, c) = ls;
            maps.rotation.at(v, u, 0) = 1.0;
        }
    return maps;
}

Image base_attribute_maps_depth_grad(const RgbdInput& input, const AttributeMaps& grad_maps) {
    Image out(input.height(), input.width(), 1);
    for (int v = 0; v < input.height(); ++v)
        for (int u = 0; u < input.width(); ++u) {
            double g = 0.0;
            for (int c = 0; c < 3; ++c) g += grad_maps.log_scale.at(v, u, c);
            out.at(v, u) = g / input.depth.at(v, u);
        }
    return out;
}

GaussianSet lift_pixel_aligned(const RgbdInput& input, const AttributeMaps& maps, double clamp_offset,
                               int view_id) {
    input.validate();
    const int h = input.height(), w = input.width();
    maps.validate(h, w);
    GaussianSet set;
    if (input.empty()) return set;
    set.primitives.reserve(static_cast<std::size_t>(h) * w);
    set.provenance.reserve(static_cast<std::size_t>(h) * w);
    const RigidTransform to_world = input.camera.camera_to_world();
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            GaussianPrimitive p;
            Vec3 offset;
            for (int c = 0; c < 3; ++c) offset[c] = std::clamp(maps.offset.at(v, u, c), -clamp_offset, clamp_offset);
            p.position = to_world.apply(unproject(u, v, input.depth.at(v, u), input.camera) + offset);
            for (int c = 0; c < 3; ++c) {
                p.color[c] = std::clamp(input.image.at(v, u, c) + maps.color_residual.at(v, u, c), 0.0, 1.0);
                p.log_scale[c] = maps.log_scale.at(v, u, c);
            }
            p.opacity_raw = maps.opacity_raw.at(v, u);
            for (int c = 0; c < 4; ++c) p.rotation[c] = maps.rotation.at(v, u, c);
            set.push_back(p, {view_id, v, u});
        }
    }
    return set;
}

LiftGradients lift_backward(const RgbdInput& input, const AttributeMaps& maps, double clamp_offset,
                            std::span<const PrimitiveGradient> grads) {
    const int h = input.height(), w = input.width();
    if (grads.size() != static_cast<std::size_t>(h) * w) {
        throw std::invalid_argument("lift_backward: expected one gradient per pixel");
    }
    LiftGradients out{AttributeMaps::zeros(h, w), Image(h, w, 3), Image(h, w, 1)};
    const Mat3& to_camera = input.camera.world_to_camera.rotation;
    const Camera& cam = input.camera;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            const PrimitiveGradient& g = grads[static_cast<std::size_t>(v) * w + u];
            const Vec3 g_cam = to_camera * g.position;
            for (int c = 0; c < 3; ++c) {
                const double off = maps.offset.at(v, u, c);
                if (off > -clamp_offset && off < clamp_offset) out.maps.offset.at(v, u, c) = g_cam[c];
                const double col = input.image.at(v, u, c) + maps.color_residual.at(v, u, c);
                if (col >= 0.0 && col <= 1.0) {
                    out.maps.color_residual.at(v, u, c) = g.color[c];
                    out.image.at(v, u, c) = g.color[c];
                }
                out.maps.log_scale.at(v, u, c) = g.log_scale[c];
            }
            out.maps.opacity_raw.at(v, u) = g.opacity_raw;
            for (int c = 0; c < 4; ++c) out.maps.rotation.at(v, u, c) = g.rotation[c];
            const Vec3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
            out.depth.at(v, u) = g_cam.dot(ray);
        }
    }
    return out;
}

namespace {

constexpr std::size_t kNoSource = static_cast<std::size_t>(-1);
// Hole pixels sit this far behind their source pixel.
constexpr double kHoleDepthScale = 3.0;

/// For every pixel, the solid pixel whose depth it takes: itself when solid,
/// otherwise the farthest solid pixel of the smallest enclosing pyramid cell
/// that contains one.
std::vector<std::size_t> farthest_solid_source(const Image& alpha, const Image& depth, double tau) {
    struct Cell {
        double depth;
        std::size_t source;
    };
    auto better = [](const Cell& a, const Cell& b) {
        if (a.source == kNoSource) return false;
        if (b.source == kNoSource) return true;
        return a.depth > b.depth || (a.depth == b.depth && a.source < b.source);
    };
    const int h = alpha.height(), w = alpha.width();
    std::vector<std::vector<Cell>> levels(1);
    std::vector<std::pair<int, int>> dims{{h, w}};
    levels[0].resize(alpha.pixel_count());
    for (std::size_t i = 0; i < levels[0].size(); ++i)
        levels[0][i] = alpha.data()[i] >= tau ? Cell{depth.data()[i], i} : Cell{0.0, kNoSource};
    while (dims.back().first > 1 || dims.back().second > 1) {
        const auto [ph, pw] = dims.back();
        const int ch = (ph + 1) / 2, cw = (pw + 1) / 2;
        std::vector<Cell> coarse(static_cast<std::size_t>(ch) * cw, Cell{0.0, kNoSource});
        for (int r = 0; r < ph; ++r)
            for (int c = 0; c < pw; ++c) {
                const Cell& child = levels.back()[static_cast<std::size_t>(r) * pw + c];
                Cell& parent = coarse[static_cast<std::size_t>(r / 2) * cw + c / 2];
                if (better(child, parent)) parent = child;
            }
        levels.push_back(std::move(coarse));
        dims.emplace_back(ch, cw);
    }
    for (std::size_t k = levels.size() - 1; k-- > 0;) {
        const int pw = dims[k].second, cw = dims[k + 1].second;
        for (std::size_t i = 0; i < levels[k].size(); ++i) {
            if (levels[k][i].source != kNoSource) continue;
            const int r = static_cast<int>(i) / pw, c = static_cast<int>(i) % pw;
            levels[k][i] = levels[k + 1][static_cast<std::size_t>(r / 2) * cw + c / 2];
        }
    }
    std::vector<std::size_t> out(levels[0].size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = levels[0][i].source;
    return out;
}

} // namespace

RgbdInput rendered_view_input(const RenderTargets& render, const Camera& cam, double tau, double fallback_depth) {
    const int h = render.alpha.height(), w = render.alpha.width();
    const std::vector<std::size_t> source = farthest_solid_source(render.alpha, render.depth, tau);
    Image depth(h, w, 1, fallback_depth);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] == kNoSource) continue;
        const double d = std::max(render.depth.data()[source[i]], raster_constants::kNearPlane);
        depth.data()[i] = source[i] == i ? d : kHoleDepthScale * d;
    }
    return {render.color, std::move(depth), cam};
}

RenderUpstream rendered_view_input_backward(const RenderTargets& render, double tau, const Image& grad_image,
                                            const Image& grad_depth) {
    const int h = render.alpha.height(), w = render.alpha.width();
    RenderUpstream up = RenderUpstream::zeros(h, w);
    up.color = grad_image;
    const std::vector<std::size_t> source = farthest_solid_source(render.alpha, render.depth, tau);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] == kNoSource) continue;
        // The near-plane floor is flat.
        if (render.depth.data()[source[i]] > raster_constants::kNearPlane)
            up.depth.data()[source[i]] += (source[i] == i ? 1.0 : kHoleDepthScale) * grad_depth.data()[i];
    }
    return up;
}

} // namespace monosplat
