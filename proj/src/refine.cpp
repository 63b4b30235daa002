#include "monosplat/refine.hpp"

#include "monosplat/predictor.hpp"
#include "monosplat/pushpull.hpp"
#include "monosplat/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace monosplat {

BinaryMask artifact_mask(const Image& alpha, const Image& normals, const Image& view_dirs, const Thresholds& th,
                         int grid_view) {
    if (!alpha.same_grid(normals) || !alpha.same_grid(view_dirs) || normals.channels() != 3 ||
        view_dirs.channels() != 3) {
        throw std::invalid_argument("artifact_mask: alpha, normal and view-direction maps differ in shape");
    }
    BinaryMask mask(alpha.height(), alpha.width(), grid_view);
    for (int v = 0; v < alpha.height(); ++v)
        for (int u = 0; u < alpha.width(); ++u) {
            if (!(alpha.at(v, u) < th.tau_artifact)) continue;
            double cosine = 0.0;
            for (int c = 0; c < 3; ++c) cosine += normals.at(v, u, c) * view_dirs.at(v, u, c);
            const double angle = std::acos(std::clamp(cosine, -1.0, 1.0));
            if (angle < th.tau_theta) mask.set(v, u, true);
        }
    return mask;
}

namespace {

Vec3 optical_axis(const Camera& cam) { return cam.camera_to_world().rotation.col(2); }

} // namespace

ArcDecomposition decompose_arc(const Camera& cam0, const Camera& cam1) {
    ArcDecomposition out;
    const Mat3 rel = cam0.world_to_camera.rotation * cam1.world_to_camera.rotation.transpose();
    out.pitch = std::atan2(-rel(1, 2), rel(1, 1));
    out.yaw = std::atan2(-rel(2, 0), rel(0, 0));

    const Vec3 c0 = cam0.center(), c1 = cam1.center();
    const Vec3 d0 = optical_axis(cam0), d1 = optical_axis(cam1);
    const Vec3 r = c0 - c1;
    const double b = d0.dot(d1), d = d0.dot(r), e = d1.dot(r);
    const double denom = 1.0 - b * b;
    if (denom < 1e-12) {
        out.pivot = c0 + d0;
        return out;
    }
    const double s = (b * e - d) / denom;
    const double t = (e - b * d) / denom;
    out.pivot = 0.5 * ((c0 + s * d0) + (c1 + t * d1));
    return out;
}

std::vector<Camera> sample_arc(const Camera& cam0, const Camera& cam1, int n) {
    if (n < 1) throw std::invalid_argument("sample_arc: need at least one frame");
    if (!cam0.same_intrinsics(cam1)) throw std::invalid_argument("sample_arc: cameras have different intrinsics");
    const ArcDecomposition arc = decompose_arc(cam0, cam1);
    const Vec3 drift = cam1.center() - orbit_camera(cam0, arc.pivot, arc.yaw, arc.pitch).center();
    std::vector<Camera> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        if (k == 0) {
            out.push_back(cam0);
            continue;
        }
        if (k == n - 1) {
            out.push_back(cam1);
            continue;
        }
        const double t = static_cast<double>(k) / (n - 1);
        Camera cam = orbit_camera(cam0, arc.pivot, t * arc.yaw, t * arc.pitch);
        const Vec3 center = cam.center() + t * drift;
        cam.world_to_camera.translation = -cam.world_to_camera.rotation * center;
        out.push_back(cam);
    }
    return out;
}

std::size_t ArcSequence::mask_popcount() const {
    std::size_t total = 0;
    for (const BinaryMask& m : masks) total += m.popcount();
    return total;
}

ArcSequence render_arc(const GaussianSet& set, const Camera& cam0, const Camera& cam1, int n, const Thresholds& th,
                       const Vec3& background) {
    ArcSequence seq;
    seq.cameras = sample_arc(cam0, cam1, n);
    for (const Camera& cam : seq.cameras) {
        RenderTargets r = rasterize(set, cam, background);
        seq.masks.push_back(artifact_mask(r.alpha, normals_from_depth(r.depth, cam), view_directions(cam), th));
        seq.renders.push_back(std::move(r));
    }
    return seq;
}

InpaintResult PushPullInpainter::inpaint(const std::vector<Image>& frames, const std::vector<BinaryMask>& masks) const {
    if (frames.size() != masks.size()) throw std::invalid_argument("inpaint: frame and mask counts differ");
    const std::size_t n = frames.size();
    for (std::size_t m = 0; m < n; ++m) {
        if (masks[m].height != frames[m].height() || masks[m].width != frames[m].width() ||
            !frames[m].same_shape(frames[0])) {
            throw std::invalid_argument("inpaint: frame " + std::to_string(m) + " does not match its mask");
        }
    }
    std::vector<Image> filled(n);
    std::vector<bool> supported(n, false);
    for (std::size_t m = 0; m < n; ++m) {
        std::vector<std::uint8_t> known(masks[m].values.size());
        for (std::size_t i = 0; i < known.size(); ++i) known[i] = masks[m].values[i] ? 0 : 1;
        const PushPull filler(masks[m].height, masks[m].width, known);
        supported[m] = filler.has_support();
        if (supported[m]) filled[m] = filler.fill(frames[m]);
    }
    if (n > 0 && std::none_of(supported.begin(), supported.end(), [](bool s) { return s; })) {
        throw std::invalid_argument("inpaint: every frame is fully masked");
    }
    for (std::size_t m = 0; m < n; ++m) {
        if (supported[m]) continue;
        for (std::size_t dist = 1; dist < n; ++dist) {
            Image acc(frames[m].height(), frames[m].width(), frames[m].channels());
            int found = 0;
            if (m >= dist && supported[m - dist]) {
                acc += filled[m - dist];
                ++found;
            }
            if (m + dist < n && supported[m + dist]) {
                acc += filled[m + dist];
                ++found;
            }
            if (found == 0) continue;
            for (double& x : acc.data()) x /= found;
            filled[m] = std::move(acc);
            break;
        }
    }

    InpaintResult out;
    out.frames = frames;
    for (std::size_t m = 0; m < n; ++m) {
        const int h = frames[m].height(), w = frames[m].width(), ch = frames[m].channels();
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                if (!masks[m].at(v, u)) continue;
                for (int c = 0; c < ch; ++c) {
                    double sum = 0.0;
                    int count = 0;
                    for (std::size_t k = (m == 0 ? 0 : m - 1); k <= std::min(n - 1, m + 1); ++k) {
                        if (k != m && !masks[k].at(v, u)) continue;
                        sum += filled[k].at(v, u, c);
                        ++count;
                    }
                    out.frames[m].at(v, u, c) = sum / count;
                }
            }
    }
    return out;
}

InpaintResult inpaint_sequence(const std::vector<Image>& frames, const std::vector<BinaryMask>& masks) {
    return PushPullInpainter().inpaint(frames, masks);
}

double video_loss(const std::vector<Image>& renders, const InpaintResult& inpainted,
                  const std::vector<BinaryMask>& masks, std::vector<Image>* grads, double scale) {
    if (renders.size() != masks.size() || inpainted.frames.size() != renders.size()) {
        throw std::invalid_argument("video_loss: frame counts differ");
    }
    if (grads && grads->size() != renders.size()) throw std::invalid_argument("video_loss: gradient count differs");
    std::size_t count = 0;
    for (std::size_t m = 0; m < renders.size(); ++m) {
        renders[m].require_same_shape(inpainted.frames[m], "video_loss");
        count += masks[m].popcount() * static_cast<std::size_t>(renders[m].channels());
    }
    if (count == 0) return 0.0;
    const double norm = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (std::size_t m = 0; m < renders.size(); ++m) {
        const Image& r = renders[m];
        for (int v = 0; v < r.height(); ++v)
            for (int u = 0; u < r.width(); ++u) {
                if (!masks[m].at(v, u)) continue;
                for (int c = 0; c < r.channels(); ++c) {
                    const double d = r.at(v, u, c) - inpainted.frames[m].at(v, u, c);
                    sum += std::abs(d);
                    if (grads) (*grads)[m].at(v, u, c) += scale * norm * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
                }
            }
    }
    return sum * norm;
}

RefineReport refine_step(Predictor& predictor, Adam& optimizer, const RgbdInput& scene, const PredictorKey& key,
                         const Camera& cam1, const TrainConfig& cfg, double lr_scale, const InPainter* inpainter) {
    const PushPullInpainter fallback;
    const InPainter& painter = inpainter ? *inpainter : fallback;
    RefineReport out;
    double video = 0.0;
    const NovelSetTerm term = [&](const CycleForward& fwd, GradientBuffer& grad) {
        const GaussianSet& set = fwd.novel_set();
        const ArcSequence arc =
            render_arc(set, scene.camera, cam1, cfg.arc_frames, cfg.thresholds, cfg.background);
        out.arc_mask_popcount = arc.mask_popcount();
        std::vector<Image> colors;
        for (const RenderTargets& r : arc.renders) colors.push_back(r.color);
        if (out.arc_mask_popcount == 0) return 0.0;
        const InpaintResult painted = painter.inpaint(colors, arc.masks);
        std::vector<Image> grads;
        for (const Image& c : colors) grads.emplace_back(c.height(), c.width(), c.channels());
        video = video_loss(colors, painted, arc.masks, &grads);
        for (std::size_t m = 0; m < arc.cameras.size(); ++m) {
            if (arc.masks[m].popcount() == 0) continue;
            RenderUpstream up = RenderUpstream::zeros(grads[m].height(), grads[m].width());
            up.color = std::move(grads[m]);
            const GradientBuffer g = rasterize_backward(set, arc.cameras[m], cfg.background, up);
            for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
        }
        return video;
    };

    predictor.zero_grad();
    out.report = cycle_gradients(predictor, scene, key, cam1, cfg, nullptr, term);
    if (!std::isfinite(out.report.weighted_total)) {
        out.error = "non-finite refinement loss";
        predictor.zero_grad();
        return out;
    }
    for (double g : predictor.gradients())
        if (!std::isfinite(g)) {
            out.error = "non-finite refinement gradient";
            predictor.zero_grad();
            return out;
        }
    optimizer.step(predictor.parameters(), predictor.gradients(), cfg.base_lr * lr_scale);
    out.applied = true;
    return out;
}

} // namespace monosplat
