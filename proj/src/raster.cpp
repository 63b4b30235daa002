#include "monosplat/raster.hpp"

#include "monosplat/parallel.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace monosplat {

using namespace raster_constants;

RenderUpstream RenderUpstream::zeros(int height, int width) {
    return {Image(height, width, 3), Image(height, width, 1), Image(height, width, 1)};
}

RenderUpstream& RenderUpstream::operator+=(const RenderUpstream& other) {
    color += other.color;
    depth += other.depth;
    alpha += other.alpha;
    return *this;
}

PrimitiveGradient& PrimitiveGradient::operator+=(const PrimitiveGradient& o) {
    position += o.position;
    color += o.color;
    opacity_raw += o.opacity_raw;
    log_scale += o.log_scale;
    rotation += o.rotation;
    return *this;
}

bool PrimitiveGradient::is_zero() const {
    return position.isZero(0.0) && color.isZero(0.0) && opacity_raw == 0.0 && log_scale.isZero(0.0) &&
           rotation.isZero(0.0);
}

bool PrimitiveGradient::all_finite() const {
    return position.allFinite() && color.allFinite() && std::isfinite(opacity_raw) && log_scale.allFinite() &&
           rotation.allFinite();
}

namespace {

// Everything the backward pass needs to chain screen-space partials back to
// the raw attributes of one primitive.
struct ProjectionState {
    ProjectedGaussian splat;
    Vec3 cam_point = Vec3::Zero();
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero();
    Mat3 cov_cam = Mat3::Zero();
    Mat3 rot = Mat3::Identity();  // R(q)
    Vec4 unit_q = Vec4(1, 0, 0, 0);
    double q_norm = 1.0;
    Vec3 scales = Vec3::Ones();
    double det = 1.0;
};

bool project_one(const GaussianPrimitive& prim, int index, const Camera& cam, ProjectionState& st) {
    const Mat3& w = cam.world_to_camera.rotation;
    const Vec3 pc = cam.world_to_camera.apply(prim.position);
    const double z = pc.z();
    if (!(z > kNearPlane)) return false;

    const double opacity = sigmoid(prim.opacity_raw);
    if (!(opacity >= kMinAlpha)) return false;

    st.q_norm = prim.rotation.norm();
    st.unit_q = prim.rotation / st.q_norm;
    st.rot = quaternion_to_rotation(prim.rotation);
    st.scales = prim.log_scale.array().exp().matrix();
    const Mat3 m = st.rot * st.scales.asDiagonal();
    const Mat3 sigma = m * m.transpose();
    st.cov_cam = w * sigma * w.transpose();

    const double inv_z = 1.0 / z;
    const double inv_z2 = inv_z * inv_z;
    st.jacobian << cam.fx * inv_z, 0.0, -cam.fx * pc.x() * inv_z2, 0.0, cam.fy * inv_z, -cam.fy * pc.y() * inv_z2;

    const Mat2 cov = st.jacobian * st.cov_cam * st.jacobian.transpose();
    const double a = cov(0, 0) + kLowPassDilation;
    const double b = 0.5 * (cov(0, 1) + cov(1, 0));
    const double c = cov(1, 1) + kLowPassDilation;
    const double det = a * c - b * b;
    assert(det > 0.0);
    if (!(det > 0.0)) return false;

    auto& s = st.splat;
    s.index = index;
    s.mean2d = Vec2(cam.fx * pc.x() * inv_z + cam.cx, cam.fy * pc.y() * inv_z + cam.cy);
    s.cov2d << a, b, b, c;
    s.conic = Vec3(c / det, -b / det, a / det);
    s.camera_depth = z;
    s.opacity = opacity;
    s.color = prim.color;
    s.max_power = 2.0 * std::log(std::min(opacity, kMaxAlpha) / kMinAlpha);
    st.cam_point = pc;
    st.det = det;

    // Exact bounding box of the ellipse {d : d^T cov^-1 d <= max_power}, one
    // pixel of slack against rounding.
    const double rx = std::sqrt(s.max_power * a);
    const double ry = std::sqrt(s.max_power * c);
    const double lo_x = std::floor(s.mean2d.x() - rx) - 1.0;
    const double hi_x = std::ceil(s.mean2d.x() + rx) + 1.0;
    const double lo_y = std::floor(s.mean2d.y() - ry) - 1.0;
    const double hi_y = std::ceil(s.mean2d.y() + ry) + 1.0;
    if (hi_x < 0.0 || hi_y < 0.0 || lo_x > cam.width - 1 || lo_y > cam.height - 1) return false;
    s.min_x = static_cast<int>(std::max(lo_x, 0.0));
    s.max_x = static_cast<int>(std::min(hi_x, static_cast<double>(cam.width - 1)));
    s.min_y = static_cast<int>(std::max(lo_y, 0.0));
    s.max_y = static_cast<int>(std::min(hi_y, static_cast<double>(cam.height - 1)));
    return true;
}

std::vector<ProjectionState> project_states(const GaussianSet& set, const Camera& cam) {
    cam.validate();
    std::vector<ProjectionState> out;
    out.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        ProjectionState st;
        if (project_one(set.primitives[i], static_cast<int>(i), cam, st)) out.push_back(st);
    }
    return out;
}

bool depth_order(const ProjectedGaussian& a, const ProjectedGaussian& b) {
    if (a.camera_depth != b.camera_depth) return a.camera_depth < b.camera_depth;
    return a.index < b.index;
}

struct Sample {
    double alpha = 0.0;
    double gauss = 0.0;
    double dx = 0.0;
    double dy = 0.0;
    bool clamped = false;
};

inline bool evaluate(const ProjectedGaussian& s, double px, double py, Sample& out) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    const double power = s.conic.x() * dx * dx + 2.0 * s.conic.y() * dx * dy + s.conic.z() * dy * dy;
    if (power > s.max_power) return false;
    const double g = std::exp(-0.5 * power);
    double alpha = s.opacity * g;
    out.clamped = alpha > kMaxAlpha;
    if (out.clamped) alpha = kMaxAlpha;
    if (alpha < kMinAlpha) return false;
    out.alpha = alpha;
    out.gauss = g;
    out.dx = dx;
    out.dy = dy;
    return true;
}

struct PixelResult {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    double alpha = 0.0;
};

// Shared by the tile renderer and the reference; identical arithmetic given
// the same ordered sequence of candidate splats.
template <typename Range>
PixelResult composite_pixel(const Range& ordered, double px, double py, const Vec3& background) {
    double transmittance = 1.0;
    Vec3 color = Vec3::Zero();
    double depth_sum = 0.0;
    double alpha_sum = 0.0;
    Sample smp;
    for (const ProjectedGaussian* s : ordered) {
        if (!evaluate(*s, px, py, smp)) continue;
        const double next_t = transmittance * (1.0 - smp.alpha);
        if (next_t < kTransmittanceCutoff) break;
        const double weight = smp.alpha * transmittance;
        color += weight * s->color;
        depth_sum += weight * s->camera_depth;
        alpha_sum += weight;
        transmittance = next_t;
    }
    PixelResult r;
    r.color = color + (1.0 - alpha_sum) * background;
    r.alpha = alpha_sum;
    r.depth = depth_sum / (alpha_sum + kDepthEpsilon);
    return r;
}

RenderTargets allocate_targets(const Camera& cam, const Vec3& background) {
    RenderTargets t{Image(cam.height, cam.width, 3), Image(cam.height, cam.width, 1), Image(cam.height, cam.width, 1)};
    for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u)
            for (int ch = 0; ch < 3; ++ch) t.color.at(v, u, ch) = background[ch];
    return t;
}

void store(RenderTargets& t, int v, int u, const PixelResult& r) {
    for (int ch = 0; ch < 3; ++ch) t.color.at(v, u, ch) = r.color[ch];
    t.depth.at(v, u) = r.depth;
    t.alpha.at(v, u) = r.alpha;
}

struct TileGrid {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<const ProjectedGaussian*>> lists;
};

TileGrid bin_tiles(const std::vector<ProjectedGaussian>& splats, const Camera& cam) {
    TileGrid grid;
    grid.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    grid.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    grid.lists.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);
    for (const auto& s : splats) {
        for (int ty = s.min_y / kTileSize; ty <= s.max_y / kTileSize; ++ty)
            for (int tx = s.min_x / kTileSize; tx <= s.max_x / kTileSize; ++tx)
                grid.lists[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(&s);
    }
    for (auto& list : grid.lists) {
        std::sort(list.begin(), list.end(),
                  [](const ProjectedGaussian* a, const ProjectedGaussian* b) { return depth_order(*a, *b); });
    }
    return grid;
}

std::vector<ProjectedGaussian> splats_of(const std::vector<ProjectionState>& states) {
    std::vector<ProjectedGaussian> out;
    out.reserve(states.size());
    for (const auto& st : states) out.push_back(st.splat);
    return out;
}

// Screen-space partials for one splat, accumulated over pixels.
struct ScreenGradient {
    Vec2 mean2d = Vec2::Zero();
    Vec3 conic = Vec3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    double depth = 0.0;

    ScreenGradient& operator+=(const ScreenGradient& o) {
        mean2d += o.mean2d;
        conic += o.conic;
        opacity += o.opacity;
        color += o.color;
        depth += o.depth;
        return *this;
    }
};

struct Contribution {
    const ProjectedGaussian* splat;
    Sample sample;
    double transmittance;
};

// Chains the screen-space partials of one splat back to raw attributes.
PrimitiveGradient chain_to_primitive(const ProjectionState& st, const ScreenGradient& sg, const Camera& cam) {
    PrimitiveGradient g;
    const auto& s = st.splat;
    g.color = sg.color;
    g.opacity_raw = sg.opacity * s.opacity * (1.0 - s.opacity);

    // conic (inverse of [[a, b], [b, c]]) -> cov2d entries a, b, c
    const double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
    const double det = st.det;
    const double inv_det2 = 1.0 / (det * det);
    const double dca = sg.conic.x(), dcb = sg.conic.y(), dcc = sg.conic.z();
    const double d_a = (-c * c * dca + b * c * dcb - b * b * dcc) * inv_det2;
    const double d_c = (-b * b * dca + a * b * dcb - a * a * dcc) * inv_det2;
    const double d_b = (2.0 * b * c * dca - (det + 2.0 * b * b) * dcb + 2.0 * a * b * dcc) * inv_det2;

    // cov2d = J cov_cam J^T (+ dilation)
    const Vec3 j0 = st.jacobian.row(0).transpose();
    const Vec3 j1 = st.jacobian.row(1).transpose();
    const Mat3 g_cov_cam = d_a * j0 * j0.transpose() + d_b * j0 * j1.transpose() + d_c * j1 * j1.transpose();
    const Mat3 sym = st.cov_cam + st.cov_cam.transpose();
    const Vec3 g_j0 = d_a * sym * j0 + d_b * st.cov_cam * j1;
    const Vec3 g_j1 = d_b * st.cov_cam.transpose() * j0 + d_c * sym * j1;

    const double x = st.cam_point.x(), y = st.cam_point.y(), z = st.cam_point.z();
    const double inv_z = 1.0 / z, inv_z2 = inv_z * inv_z, inv_z3 = inv_z2 * inv_z;
    Vec3 g_pc = Vec3::Zero();
    g_pc.x() += g_j0.z() * (-cam.fx * inv_z2);
    g_pc.y() += g_j1.z() * (-cam.fy * inv_z2);
    g_pc.z() += g_j0.x() * (-cam.fx * inv_z2) + g_j0.z() * (2.0 * cam.fx * x * inv_z3) +
                g_j1.y() * (-cam.fy * inv_z2) + g_j1.z() * (2.0 * cam.fy * y * inv_z3);

    // mean2d = (fx x / z + cx, fy y / z + cy)
    g_pc.x() += sg.mean2d.x() * cam.fx * inv_z;
    g_pc.z() += sg.mean2d.x() * (-cam.fx * x * inv_z2);
    g_pc.y() += sg.mean2d.y() * cam.fy * inv_z;
    g_pc.z() += sg.mean2d.y() * (-cam.fy * y * inv_z2);
    g_pc.z() += sg.depth;

    const Mat3& w = cam.world_to_camera.rotation;
    g.position = w.transpose() * g_pc;

    // cov_cam = W Sigma W^T, Sigma = M M^T, M = R diag(s)
    const Mat3 g_sigma = w.transpose() * g_cov_cam * w;
    const Mat3 m = st.rot * st.scales.asDiagonal();
    const Mat3 g_m = (g_sigma + g_sigma.transpose()) * m;
    Mat3 g_rot;
    for (int j = 0; j < 3; ++j) {
        g_rot.col(j) = g_m.col(j) * st.scales[j];
        g.log_scale[j] = g_m.col(j).dot(st.rot.col(j)) * st.scales[j];
    }
    const auto d_rot = rotation_jacobian(st.unit_q);
    Vec4 g_unit;
    for (int k = 0; k < 4; ++k) g_unit[k] = (d_rot[k].array() * g_rot.array()).sum();
    g.rotation = (g_unit - st.unit_q * st.unit_q.dot(g_unit)) / st.q_norm;
    return g;
}

} // namespace

std::vector<ProjectedGaussian> project(const GaussianSet& set, const Camera& cam) {
    return splats_of(project_states(set, cam));
}

RenderTargets rasterize(const GaussianSet& set, const Camera& cam, const Vec3& background) {
    const auto splats = project(set, cam);
    RenderTargets out = allocate_targets(cam, background);
    const TileGrid grid = bin_tiles(splats, cam);
    parallel_for(grid.lists.size(), worker_count(), [&](int, std::size_t tile) {
        const int ty = static_cast<int>(tile) / grid.tiles_x;
        const int tx = static_cast<int>(tile) % grid.tiles_x;
        const auto& list = grid.lists[tile];
        for (int v = ty * kTileSize; v < std::min(cam.height, (ty + 1) * kTileSize); ++v)
            for (int u = tx * kTileSize; u < std::min(cam.width, (tx + 1) * kTileSize); ++u)
                store(out, v, u, composite_pixel(list, u, v, background));
    });
    return out;
}

RenderTargets rasterize_reference(const GaussianSet& set, const Camera& cam, const Vec3& background) {
    auto splats = project(set, cam);
    std::sort(splats.begin(), splats.end(), depth_order);
    std::vector<const ProjectedGaussian*> ordered;
    for (const auto& s : splats) ordered.push_back(&s);
    RenderTargets out = allocate_targets(cam, background);
    for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u) store(out, v, u, composite_pixel(ordered, u, v, background));
    return out;
}

GradientBuffer rasterize_backward(const GaussianSet& set, const Camera& cam, const Vec3& background,
                                  const RenderUpstream& upstream) {
    if (upstream.color.height() != cam.height || upstream.color.width() != cam.width ||
        upstream.color.channels() != 3 || !upstream.depth.same_grid(upstream.color) ||
        !upstream.alpha.same_grid(upstream.color) || upstream.depth.channels() != 1 ||
        upstream.alpha.channels() != 1) {
        throw std::invalid_argument("rasterize_backward: upstream dimensions do not match the camera");
    }
    GradientBuffer result(set.size());
    const auto states = project_states(set, cam);
    if (states.empty()) return result;

    std::vector<ProjectedGaussian> splats = splats_of(states);
    const TileGrid grid = bin_tiles(splats, cam);
    const int workers = std::max(1, std::min<int>(worker_count(), static_cast<int>(grid.lists.size())));
    std::vector<std::vector<ScreenGradient>> partial(workers, std::vector<ScreenGradient>(splats.size()));

    parallel_for(grid.lists.size(), workers, [&](int worker, std::size_t tile) {
        auto& acc = partial[worker];
        const int ty = static_cast<int>(tile) / grid.tiles_x;
        const int tx = static_cast<int>(tile) % grid.tiles_x;
        const auto& list = grid.lists[tile];
        std::vector<Contribution> used;
        for (int v = ty * kTileSize; v < std::min(cam.height, (ty + 1) * kTileSize); ++v) {
            for (int u = tx * kTileSize; u < std::min(cam.width, (tx + 1) * kTileSize); ++u) {
                const Vec3 g_color(upstream.color.at(v, u, 0), upstream.color.at(v, u, 1), upstream.color.at(v, u, 2));
                const double g_depth = upstream.depth.at(v, u);
                const double g_alpha = upstream.alpha.at(v, u);
                if (g_color.isZero(0.0) && g_depth == 0.0 && g_alpha == 0.0) continue;

                // Forward replay, identical to composite_pixel.
                used.clear();
                double transmittance = 1.0, depth_sum = 0.0, alpha_sum = 0.0;
                Sample smp;
                for (const ProjectedGaussian* s : list) {
                    if (!evaluate(*s, u, v, smp)) continue;
                    const double next_t = transmittance * (1.0 - smp.alpha);
                    if (next_t < kTransmittanceCutoff) break;
                    const double weight = smp.alpha * transmittance;
                    depth_sum += weight * s->camera_depth;
                    alpha_sum += weight;
                    used.push_back({s, smp, transmittance});
                    transmittance = next_t;
                }
                if (used.empty()) continue;

                // Loss restricted to this pixel is sum_k w_k f_k + const with
                // w_k = alpha_k T_k; background enters through (1 - A) b.
                const double denom = alpha_sum + kDepthEpsilon;
                const double g_depth_sum = g_depth / denom;
                const double g_alpha_sum = g_alpha - g_depth * depth_sum / (denom * denom) - g_color.dot(background);

                double behind = 0.0;  // sum_{m > k} f_m w_m
                for (auto it = used.rbegin(); it != used.rend(); ++it) {
                    const ProjectedGaussian& s = *it->splat;
                    const Sample& sm = it->sample;
                    const double weight = sm.alpha * it->transmittance;
                    const double f = g_color.dot(s.color) + g_depth_sum * s.camera_depth + g_alpha_sum;
                    const double g_a = f * it->transmittance - behind / (1.0 - sm.alpha);
                    behind += f * weight;

                    const std::size_t k = static_cast<std::size_t>(&s - splats.data());
                    ScreenGradient& sg = acc[k];
                    sg.color += weight * g_color;
                    sg.depth += weight * g_depth_sum;
                    if (sm.clamped) continue;
                    sg.opacity += g_a * sm.gauss;
                    const double g_power = -0.5 * sm.alpha * g_a;
                    sg.conic += g_power * Vec3(sm.dx * sm.dx, 2.0 * sm.dx * sm.dy, sm.dy * sm.dy);
                    const double ca = s.conic.x(), cb = s.conic.y(), cc = s.conic.z();
                    sg.mean2d += g_power * Vec2(-2.0 * (ca * sm.dx + cb * sm.dy), -2.0 * (cb * sm.dx + cc * sm.dy));
                }
            }
        }
    });

    for (std::size_t k = 0; k < splats.size(); ++k) {
        ScreenGradient total;
        for (int w = 0; w < workers; ++w) total += partial[w][k];
        result[states[k].splat.index] = chain_to_primitive(states[k], total, cam);
    }
    return result;
}

Vec3 view_direction(const Camera& cam, double u, double v) {
    const Vec3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    return -ray.normalized();
}

Image view_directions(const Camera& cam) {
    Image out(cam.height, cam.width, 3);
    for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u) {
            const Vec3 d = view_direction(cam, u, v);
            for (int ch = 0; ch < 3; ++ch) out.at(v, u, ch) = d[ch];
        }
    return out;
}

Image normals_from_depth(const Image& depth, const Camera& cam) {
    if (depth.height() != cam.height || depth.width() != cam.width || depth.channels() != 1) {
        throw std::invalid_argument("normals_from_depth: depth map does not match the camera");
    }
    const int h = depth.height(), w = depth.width();
    auto point = [&](int u, int v) {
        const double d = depth.at(v, u);
        return Vec3(d * (u - cam.cx) / cam.fx, d * (v - cam.cy) / cam.fy, d);
    };
    Image out(h, w, 3);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            const int u0 = std::max(u - 1, 0), u1 = std::min(u + 1, w - 1);
            const int v0 = std::max(v - 1, 0), v1 = std::min(v + 1, h - 1);
            const Vec3 tu = point(u1, v) - point(u0, v);
            const Vec3 tv = point(u, v1) - point(u, v0);
            Vec3 n = tv.cross(tu);
            const double len = n.norm();
            n = len > 1e-12 ? Vec3(n / len) : view_direction(cam, u, v);
            for (int ch = 0; ch < 3; ++ch) out.at(v, u, ch) = n[ch];
        }
    }
    return out;
}

} // namespace monosplat
