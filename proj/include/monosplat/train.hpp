#pragma once

#include "monosplat/aggregate.hpp"
#include "monosplat/core.hpp"
#include "monosplat/lift.hpp"
#include "monosplat/losses.hpp"
#include "monosplat/predictor.hpp"
#include "monosplat/raster.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace monosplat {

struct CameraSampler {
    double yaw_spread = 0.3;    // standard deviation, radians
    double pitch_spread = 0.15;

    void validate() const;
};

/// Unprojection of the image center at the median input depth, world frame.
Vec3 orbit_pivot(const Camera& cam, const Image& depth);

/// Rotates the camera about `pivot` by yaw (about the camera's vertical axis)
/// and then pitch (about its horizontal axis). The pivot stays at the same
/// camera-frame position, so it keeps projecting to the same pixel.
Camera orbit_camera(const Camera& cam, const Vec3& pivot, double yaw, double pitch);

/// Normal(0, sd) truncated to [-2 sd, 2 sd] by rejection.
double sample_truncated_normal(double sd, std::mt19937_64& rng);

struct OrbitSample {
    Camera camera;
    double yaw = 0.0;
    double pitch = 0.0;
};

OrbitSample sample_novel_camera(const Camera& canonical, const Vec3& pivot, const CameraSampler& sampler,
                                std::mt19937_64& rng);

/// Adaptive moment estimation with bias correction.
class Adam {
public:
    explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
    long steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

struct TrainConfig {
    std::string predictor = "tinyconv";
    int hidden = 16;
    int steps = 500;
    int refine_steps = 0;
    double base_lr = 1e-3;
    double refine_lr_scale = 0.1;
    double branch_mix = 0.5;  // probability of a canonical step
    bool aggregation = true;
    bool stop_gradient = true;
    LossWeights weights;
    Thresholds thresholds;
    CameraSampler sampler;
    std::string perceptual = "pyramid_l1";
    std::string clip = "mean_color_l1";
    Vec3 background = Vec3::Zero();
    std::uint64_t seed = 0;
    int arc_frames = 16;
    int eval_every = 0;  // 0: evaluate only after the last step

    void validate() const;
};

/// Everything the cycle branch computes before the loss.
struct CycleForward {
    Camera cam1;
    bool aggregated = false;
    double clamp_offset = 0.0;
    AttributeMaps maps0;
    GaussianSet gs0;
    RenderTargets render01;      // GS0 seen from view 1
    StopGradBoundary novel;      // rendered view-1 input
    AttributeMaps maps1;
    GaussianSet gs1;
    AggregatedPair pair;
    RenderTargets render_hat0_in_view1;
    RenderTargets render_hat1_in_view0;

    /// The set whose novel-view render is supervised: the aggregated view-0
    /// set, or GS0 itself when aggregation is disabled.
    const GaussianSet& novel_set() const;
    const RenderTargets& novel_render() const;
};

CycleForward cycle_forward(const Predictor& predictor, const RgbdInput& scene, const PredictorKey& key,
                           const Camera& cam1, const TrainConfig& cfg);

/// Extra objective on the novel set (the refinement video term). Returns the
/// term's value and adds its gradient w.r.t. the novel set to `grad`.
using NovelSetTerm = std::function<double(const CycleForward&, GradientBuffer& grad)>;

/// Per-primitive gradients w.r.t. GS0, split by route.
struct CycleTrace {
    GradientBuffer gs0_direct;       // through the aggregated renders
    GradientBuffer gs0_via_novel;    // through the rendered view-1 input
};

/// Canonical branch: accumulates gradients into the predictor and reports the losses.
LossReport canonical_gradients(Predictor& predictor, const RgbdInput& scene, const PredictorKey& key,
                               const TrainConfig& cfg);

/// Novel branch at a fixed view-1 camera. With aggregation disabled the cycle
/// term is zero and the novel losses act on GS0's render directly.
LossReport cycle_gradients(Predictor& predictor, const RgbdInput& scene, const PredictorKey& key,
                           const Camera& cam1, const TrainConfig& cfg, CycleTrace* trace = nullptr,
                           const NovelSetTerm& extra = {});

struct StepResult {
    LossReport report;
    Branch branch = Branch::canonical;
    bool applied = false;
    std::string error;
};

StepResult train_step_canonical(Predictor& predictor, Adam& optimizer, const RgbdInput& scene,
                                const PredictorKey& key, const TrainConfig& cfg, double lr);

StepResult train_step_cycle(Predictor& predictor, Adam& optimizer, const RgbdInput& scene,
                            const PredictorKey& key, const Camera& cam1, const TrainConfig& cfg, double lr);

std::unique_ptr<Predictor> make_initial_predictor(const TrainConfig& cfg, const std::vector<RgbdInput>& corpus);

struct TrainingResult {
    std::unique_ptr<Predictor> predictor;
    long steps_applied = 0;
    long steps_aborted = 0;
};

/// Stage one for cfg.steps steps, then cfg.refine_steps refinement steps.
/// Writes one JSON record per step (and per evaluation) to `metrics` if given.
/// When `initial` is given, training continues from a copy of it.
TrainingResult run_training(const std::vector<RgbdInput>& corpus, const TrainConfig& cfg, std::ostream* metrics,
                            const Predictor* initial = nullptr);

/// Stage two only, starting from `initial`.
TrainingResult run_refinement(const std::vector<RgbdInput>& corpus, const TrainConfig& cfg, std::ostream* metrics,
                              const Predictor& initial);

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);

struct Checkpoint {
    std::unique_ptr<Predictor> predictor;
    TrainConfig config;
};

void save_checkpoint(const std::string& path, const Predictor& predictor, const TrainConfig& cfg);
Checkpoint load_checkpoint(const std::string& path);

} // namespace monosplat
