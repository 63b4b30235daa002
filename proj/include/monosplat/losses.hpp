#pragma once

#include "monosplat/core.hpp"
#include "monosplat/image.hpp"
#include "monosplat/lift.hpp"
#include "monosplat/raster.hpp"

#include <memory>
#include <optional>
#include <string>

namespace monosplat {

// Every loss returns its value. When a gradient target is passed, `scale`
// times the loss gradient is added to it.

/// Mean color L1 over H*W*3 plus mean depth L1 over pixels with alpha > tau.
/// The mask is treated as a constant.
double recon_loss(const RenderTargets& render, const RgbdInput& target, double tau,
                  RenderUpstream* grad = nullptr, double scale = 1.0);

/// Same formula as recon_loss, applied to the render of the aggregated novel set in view 0.
double cycle_loss(const RenderTargets& render, const RgbdInput& target, double tau,
                  RenderUpstream* grad = nullptr, double scale = 1.0);

struct PhotometricResult {
    double value = 0.0;
    std::size_t in_bounds = 0;
    bool all_out_of_bounds = false;
};

/// Warps every pixel of the view-0 image into view 1 with the view-0 depth,
/// bilinearly samples `rendered1` there and averages the color L1 over the
/// pixels that land inside view 1.
PhotometricResult photometric_loss(const Image& image0, const Image& depth0, const Image& rendered1,
                                   const Camera& cam0, const Camera& cam1, Image* grad_rendered1 = nullptr,
                                   double scale = 1.0);

/// Pluggable image-similarity term for the perceptual and semantic slots.
class FeatureLoss {
public:
    virtual ~FeatureLoss() = default;
    virtual std::string name() const = 0;
    virtual double evaluate(const Image& rendered, const Image& reference, Image* grad_rendered,
                            double scale) const = 0;
};

/// Sum over pooling factors 1, 2, 4, 8 of the mean L1 between average-pooled images.
class PyramidL1 final : public FeatureLoss {
public:
    std::string name() const override { return "pyramid_l1"; }
    double evaluate(const Image& rendered, const Image& reference, Image* grad_rendered,
                    double scale) const override;
};

/// L1 between the per-channel image means, averaged over channels.
class MeanColorL1 final : public FeatureLoss {
public:
    std::string name() const override { return "mean_color_l1"; }
    double evaluate(const Image& rendered, const Image& reference, Image* grad_rendered,
                    double scale) const override;
};

std::unique_ptr<FeatureLoss> make_feature_loss(const std::string& name);

double perceptual_surrogate(const Image& rendered, const Image& reference, Image* grad_rendered = nullptr,
                            double scale = 1.0);

/// Anisotropic TV: mean |horizontal forward difference| + mean |vertical forward difference|.
double tv_loss(const Image& depth, Image* grad = nullptr, double scale = 1.0);

enum class Branch { canonical, novel };

struct LossReport {
    std::optional<double> recon;
    std::optional<double> cycle;
    std::optional<double> photo;
    std::optional<double> perp_surrogate;
    std::optional<double> clip_slot;
    std::optional<double> reg;
    std::optional<double> novel;  // photo + lambda_perp * perp + lambda_clip * clip
    std::optional<double> video;
    bool photo_warning = false;
    double weighted_total = 0.0;
};

/// canonical: recon + lambda_reg * reg
/// novel:     cycle + lambda_reg * reg + lambda_novel * (photo + lambda_perp * perp + lambda_clip * clip)
/// A present video term is added with unit weight. Throws std::invalid_argument
/// when a required term is missing.
double total_loss(Branch branch, const LossReport& terms, const LossWeights& w);

/// Marks the rendered novel-view input. While `blocking` is set, gradients
/// reaching it are discarded instead of flowing back into the render.
struct StopGradBoundary {
    RgbdInput value;
    bool blocking = true;

    /// Returns true when the gradient should be propagated further.
    bool passes() const { return !blocking; }
};

} // namespace monosplat
