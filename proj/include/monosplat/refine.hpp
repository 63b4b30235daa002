#pragma once

#include "monosplat/aggregate.hpp"
#include "monosplat/core.hpp"
#include "monosplat/image.hpp"
#include "monosplat/losses.hpp"
#include "monosplat/raster.hpp"

#include <memory>
#include <string>
#include <vector>

namespace monosplat {

class Adam;
class Predictor;
struct PredictorKey;
struct RgbdInput;
struct TrainConfig;

/// True where alpha < tau_artifact and the angle between the normal and the
/// view direction is below tau_theta.
BinaryMask artifact_mask(const Image& alpha, const Image& normals, const Image& view_dirs, const Thresholds& th,
                         int grid_view = 0);

/// Relative pose of cam1 with respect to cam0 expressed as an orbit.
struct ArcDecomposition {
    Vec3 pivot = Vec3::Zero();
    double yaw = 0.0;
    double pitch = 0.0;
};

ArcDecomposition decompose_arc(const Camera& cam0, const Camera& cam1);

/// n cameras with (yaw, pitch) interpolated linearly about the pivot where the
/// two optical axes pass closest; the first is cam0 and the last is cam1.
std::vector<Camera> sample_arc(const Camera& cam0, const Camera& cam1, int n = 16);

struct ArcSequence {
    std::vector<Camera> cameras;
    std::vector<RenderTargets> renders;
    std::vector<BinaryMask> masks;

    std::size_t mask_popcount() const;
};

ArcSequence render_arc(const GaussianSet& set, const Camera& cam0, const Camera& cam1, int n, const Thresholds& th,
                       const Vec3& background);

struct InpaintResult {
    std::vector<Image> frames;
};

/// Sequence in-painter. Implementations must return unmasked pixels unchanged.
class InPainter {
public:
    virtual ~InPainter() = default;
    virtual std::string name() const = 0;
    virtual InpaintResult inpaint(const std::vector<Image>& frames, const std::vector<BinaryMask>& masks) const = 0;
};

/// Per-frame push-pull fill, then each filled pixel is averaged with the
/// filled values of the neighboring frames that mask the same pixel.
/// Frames without any unmasked pixel take the nearest filled frames.
class PushPullInpainter final : public InPainter {
public:
    std::string name() const override { return "pushpull"; }
    InpaintResult inpaint(const std::vector<Image>& frames, const std::vector<BinaryMask>& masks) const override;
};

InpaintResult inpaint_sequence(const std::vector<Image>& frames, const std::vector<BinaryMask>& masks);

/// Masked L1 summed over frames and normalized by masked pixels x channels.
/// In-painted frames are constants; `grads` (one per frame) receives the
/// gradient w.r.t. the renders.
double video_loss(const std::vector<Image>& renders, const InpaintResult& inpainted,
                  const std::vector<BinaryMask>& masks, std::vector<Image>* grads = nullptr, double scale = 1.0);

struct RefineReport {
    LossReport report;
    std::size_t arc_mask_popcount = 0;
    bool applied = false;
    std::string error;
};

/// One refinement step: a novel-branch step at cam1 plus the video loss on
/// the arc rendered from the novel set, applied at base_lr * lr_scale.
RefineReport refine_step(Predictor& predictor, Adam& optimizer, const RgbdInput& scene, const PredictorKey& key,
                         const Camera& cam1, const TrainConfig& cfg, double lr_scale,
                         const InPainter* inpainter = nullptr);

} // namespace monosplat
