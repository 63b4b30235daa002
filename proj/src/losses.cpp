#include "monosplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace monosplat {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_grid(const Image& a, const Image& b, const char* what) {
    if (!a.same_grid(b)) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + a.shape_string() + " vs " +
                                    b.shape_string() + ")");
    }
}

} // namespace

double recon_loss(const RenderTargets& render, const RgbdInput& target, double tau, RenderUpstream* grad,
                  double scale) {
    render.color.require_same_shape(target.image, "recon_loss");
    require_grid(render.depth, target.depth, "recon_loss");
    const int h = target.height(), w = target.width();
    if (grad) {
        require_grid(grad->color, target.image, "recon_loss gradient");
    }
    const double color_norm = 1.0 / static_cast<double>(target.image.size());
    double color_sum = 0.0;
    for (std::size_t i = 0; i < target.image.size(); ++i) {
        const double d = render.color.data()[i] - target.image.data()[i];
        color_sum += std::abs(d);
        if (grad) grad->color.data()[i] += scale * color_norm * sign_of(d);
    }
    std::size_t solid = 0;
    double depth_sum = 0.0;
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            if (render.alpha.at(v, u) > tau) {
                ++solid;
                depth_sum += std::abs(render.depth.at(v, u) - target.depth.at(v, u));
            }
    double depth_term = 0.0;
    if (solid > 0) {
        depth_term = depth_sum / static_cast<double>(solid);
        if (grad) {
            const double k = scale / static_cast<double>(solid);
            for (int v = 0; v < h; ++v)
                for (int u = 0; u < w; ++u)
                    if (render.alpha.at(v, u) > tau)
                        grad->depth.at(v, u) += k * sign_of(render.depth.at(v, u) - target.depth.at(v, u));
        }
    }
    return color_sum * color_norm + depth_term;
}

double cycle_loss(const RenderTargets& render, const RgbdInput& target, double tau, RenderUpstream* grad,
                  double scale) {
    return recon_loss(render, target, tau, grad, scale);
}

PhotometricResult photometric_loss(const Image& image0, const Image& depth0, const Image& rendered1,
                                   const Camera& cam0, const Camera& cam1, Image* grad_rendered1, double scale) {
    require_grid(image0, depth0, "photometric_loss");
    if (rendered1.height() != cam1.height || rendered1.width() != cam1.width || rendered1.channels() != 3) {
        throw std::invalid_argument("photometric_loss: view-1 image does not match its camera");
    }
    if (grad_rendered1) grad_rendered1->require_same_shape(rendered1, "photometric_loss gradient");
    const int h0 = image0.height(), w0 = image0.width();
    const int h1 = rendered1.height(), w1 = rendered1.width();
    const RigidTransform to_cam1 = cam1.world_to_camera.compose(cam0.camera_to_world());

    struct Sample {
        int x0, y0, x1, y1;
        double fx, fy;
        int v, u;
    };
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(h0) * w0);
    for (int v = 0; v < h0; ++v)
        for (int u = 0; u < w0; ++u) {
            const double d = depth0.at(v, u);
            if (!(d > 0.0)) continue;
            const Vec3 p = to_cam1.apply(unproject(u, v, d, cam0));
            if (!(p.z() > raster_constants::kNearPlane)) continue;
            const double px = cam1.fx * p.x() / p.z() + cam1.cx;
            const double py = cam1.fy * p.y() / p.z() + cam1.cy;
            if (!(px > -0.5 && px < w1 - 0.5 && py > -0.5 && py < h1 - 0.5)) continue;
            const double fl_x = std::floor(px), fl_y = std::floor(py);
            Sample s;
            s.fx = px - fl_x;
            s.fy = py - fl_y;
            s.x0 = std::clamp(static_cast<int>(fl_x), 0, w1 - 1);
            s.x1 = std::clamp(static_cast<int>(fl_x) + 1, 0, w1 - 1);
            s.y0 = std::clamp(static_cast<int>(fl_y), 0, h1 - 1);
            s.y1 = std::clamp(static_cast<int>(fl_y) + 1, 0, h1 - 1);
            s.v = v;
            s.u = u;
            samples.push_back(s);
        }

    PhotometricResult out;
    out.in_bounds = samples.size();
    if (samples.empty()) {
        out.all_out_of_bounds = true;
        return out;
    }
    const double norm = 1.0 / (3.0 * static_cast<double>(samples.size()));
    double sum = 0.0;
    for (const Sample& s : samples) {
        const double w00 = (1 - s.fx) * (1 - s.fy), w01 = s.fx * (1 - s.fy);
        const double w10 = (1 - s.fx) * s.fy, w11 = s.fx * s.fy;
        for (int c = 0; c < 3; ++c) {
            const double sampled = w00 * rendered1.at(s.y0, s.x0, c) + w01 * rendered1.at(s.y0, s.x1, c) +
                                   w10 * rendered1.at(s.y1, s.x0, c) + w11 * rendered1.at(s.y1, s.x1, c);
            const double diff = sampled - image0.at(s.v, s.u, c);
            sum += std::abs(diff);
            if (grad_rendered1) {
                const double g = scale * norm * sign_of(diff);
                grad_rendered1->at(s.y0, s.x0, c) += g * w00;
                grad_rendered1->at(s.y0, s.x1, c) += g * w01;
                grad_rendered1->at(s.y1, s.x0, c) += g * w10;
                grad_rendered1->at(s.y1, s.x1, c) += g * w11;
            }
        }
    }
    out.value = sum * norm;
    return out;
}

double PyramidL1::evaluate(const Image& rendered, const Image& reference, Image* grad_rendered,
                           double scale) const {
    rendered.require_same_shape(reference, "PyramidL1");
    if (grad_rendered) grad_rendered->require_same_shape(rendered, "PyramidL1 gradient");
    const int h = rendered.height(), w = rendered.width(), ch = rendered.channels();
    double total = 0.0;
    for (int factor : {1, 2, 4, 8}) {
        const int ph = h / factor, pw = w / factor;
        if (ph == 0 || pw == 0) continue;
        const double area = static_cast<double>(factor) * factor;
        const double norm = 1.0 / (static_cast<double>(ph) * pw * ch);
        double level = 0.0;
        for (int by = 0; by < ph; ++by)
            for (int bx = 0; bx < pw; ++bx)
                for (int c = 0; c < ch; ++c) {
                    double diff = 0.0;
                    for (int y = by * factor; y < (by + 1) * factor; ++y)
                        for (int x = bx * factor; x < (bx + 1) * factor; ++x)
                            diff += rendered.at(y, x, c) - reference.at(y, x, c);
                    diff /= area;
                    level += std::abs(diff);
                    if (grad_rendered) {
                        const double g = scale * norm * sign_of(diff) / area;
                        for (int y = by * factor; y < (by + 1) * factor; ++y)
                            for (int x = bx * factor; x < (bx + 1) * factor; ++x) grad_rendered->at(y, x, c) += g;
                    }
                }
        total += level * norm;
    }
    return total;
}

double MeanColorL1::evaluate(const Image& rendered, const Image& reference, Image* grad_rendered,
                             double scale) const {
    rendered.require_same_shape(reference, "MeanColorL1");
    if (grad_rendered) grad_rendered->require_same_shape(rendered, "MeanColorL1 gradient");
    const int ch = rendered.channels();
    const std::size_t n = rendered.pixel_count();
    if (n == 0 || ch == 0) return 0.0;
    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        double diff = 0.0;
        for (std::size_t p = 0; p < n; ++p) diff += rendered.data()[p * ch + c] - reference.data()[p * ch + c];
        diff /= static_cast<double>(n);
        total += std::abs(diff);
        if (grad_rendered) {
            const double g = scale * sign_of(diff) / (static_cast<double>(n) * ch);
            for (std::size_t p = 0; p < n; ++p) grad_rendered->data()[p * ch + c] += g;
        }
    }
    return total / ch;
}

std::unique_ptr<FeatureLoss> make_feature_loss(const std::string& name) {
    if (name == "pyramid_l1") return std::make_unique<PyramidL1>();
    if (name == "mean_color_l1") return std::make_unique<MeanColorL1>();
    throw std::invalid_argument("unknown feature loss '" + name + "'");
}

double perceptual_surrogate(const Image& rendered, const Image& reference, Image* grad_rendered, double scale) {
    return PyramidL1().evaluate(rendered, reference, grad_rendered, scale);
}

double tv_loss(const Image& depth, Image* grad, double scale) {
    const int h = depth.height(), w = depth.width();
    if (grad) grad->require_same_shape(depth, "tv_loss gradient");
    double total = 0.0;
    if (w > 1) {
        const double norm = 1.0 / (static_cast<double>(h) * (w - 1));
        double sum = 0.0;
        for (int v = 0; v < h; ++v)
            for (int u = 0; u + 1 < w; ++u) {
                const double d = depth.at(v, u + 1) - depth.at(v, u);
                sum += std::abs(d);
                if (grad) {
                    const double g = scale * norm * sign_of(d);
                    grad->at(v, u + 1) += g;
                    grad->at(v, u) -= g;
                }
            }
        total += sum * norm;
    }
    if (h > 1) {
        const double norm = 1.0 / (static_cast<double>(h - 1) * w);
        double sum = 0.0;
        for (int v = 0; v + 1 < h; ++v)
            for (int u = 0; u < w; ++u) {
                const double d = depth.at(v + 1, u) - depth.at(v, u);
                sum += std::abs(d);
                if (grad) {
                    const double g = scale * norm * sign_of(d);
                    grad->at(v + 1, u) += g;
                    grad->at(v, u) -= g;
                }
            }
        total += sum * norm;
    }
    return total;
}

double total_loss(Branch branch, const LossReport& t, const LossWeights& w) {
    auto need = [](const std::optional<double>& term, const char* name) {
        if (!term) throw std::invalid_argument(std::string("total_loss: missing term '") + name + "'");
        return *term;
    };
    double total = 0.0;
    if (branch == Branch::canonical) {
        total = need(t.recon, "recon") + w.lambda_reg * need(t.reg, "reg");
    } else {
        const double novel = need(t.photo, "photo") + w.lambda_perp * need(t.perp_surrogate, "perp_surrogate") +
                             w.lambda_clip * need(t.clip_slot, "clip_slot");
        total = need(t.cycle, "cycle") + w.lambda_reg * need(t.reg, "reg") + w.lambda_novel * novel;
    }
    if (t.video) total += *t.video;
    return total;
}

} // namespace monosplat
