#include "monosplat/train.hpp"

#include "monosplat/metrics.hpp"
#include "monosplat/refine.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace monosplat {

using nlohmann::json;

void CameraSampler::validate() const {
    if (!(yaw_spread >= 0.0) || !(pitch_spread >= 0.0) || !std::isfinite(yaw_spread) || !std::isfinite(pitch_spread)) {
        throw std::invalid_argument("CameraSampler: spreads must be finite and non-negative");
    }
}

Vec3 orbit_pivot(const Camera& cam, const Image& depth) {
    const double d = median_of(depth.data());
    return cam.camera_to_world().apply(unproject(cam.cx, cam.cy, d, cam));
}

namespace {

Mat3 rot_y(double a) {
    Mat3 m;
    m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return m;
}

Mat3 rot_x(double a) {
    Mat3 m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}

} // namespace

Camera orbit_camera(const Camera& cam, const Vec3& pivot, double yaw, double pitch) {
    if (yaw == 0.0 && pitch == 0.0) return cam;
    const Mat3 c2w = cam.world_to_camera.rotation.transpose();
    const Mat3 orbit = c2w * rot_y(yaw) * rot_x(pitch) * c2w.transpose();
    const Vec3 center = pivot + orbit * (cam.center() - pivot);
    Camera out = cam;
    out.world_to_camera.rotation = (orbit * c2w).transpose();
    out.world_to_camera.translation = -out.world_to_camera.rotation * center;
    return out;
}

double sample_truncated_normal(double sd, std::mt19937_64& rng) {
    if (sd <= 0.0) return 0.0;
    std::normal_distribution<double> normal(0.0, sd);
    for (;;) {
        const double x = normal(rng);
        if (std::abs(x) <= 2.0 * sd) return x;
    }
}

OrbitSample sample_novel_camera(const Camera& canonical, const Vec3& pivot, const CameraSampler& sampler,
                                std::mt19937_64& rng) {
    sampler.validate();
    OrbitSample s;
    s.yaw = sample_truncated_normal(sampler.yaw_spread, rng);
    s.pitch = sample_truncated_normal(sampler.pitch_spread, rng);
    s.camera = orbit_camera(canonical, pivot, s.yaw, s.pitch);
    return s;
}

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw std::invalid_argument("Adam::step: parameter count changed");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

void TrainConfig::validate() const {
    if (predictor != "tinyconv" && predictor != "directfit") {
        throw std::invalid_argument("TrainConfig: unknown predictor '" + predictor + "'");
    }
    if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden must be positive");
    if (steps < 0 || refine_steps < 0) throw std::invalid_argument("TrainConfig: step counts must be non-negative");
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw std::invalid_argument("TrainConfig: base_lr must be positive");
    if (!(refine_lr_scale >= 0.0)) throw std::invalid_argument("TrainConfig: refine_lr_scale must be non-negative");
    if (!(branch_mix >= 0.0 && branch_mix <= 1.0)) throw std::invalid_argument("TrainConfig: branch_mix must lie in [0, 1]");
    if (arc_frames < 2) throw std::invalid_argument("TrainConfig: arc_frames must be at least 2");
    if (eval_every < 0) throw std::invalid_argument("TrainConfig: eval_every must be non-negative");
    weights.validate();
    thresholds.validate();
    sampler.validate();
    make_feature_loss(perceptual);
    make_feature_loss(clip);
}

// ------------------------------------------------------------------ branches

const GaussianSet& CycleForward::novel_set() const { return aggregated ? pair.view0.merged_set : gs0; }

const RenderTargets& CycleForward::novel_render() const { return aggregated ? render_hat0_in_view1 : render01; }

CycleForward cycle_forward(const Predictor& predictor, const RgbdInput& scene, const PredictorKey& key,
                           const Camera& cam1, const TrainConfig& cfg) {
    scene.validate();
    if (!cam1.same_intrinsics(scene.camera)) throw std::invalid_argument("cycle_forward: view 1 intrinsics differ");
    CycleForward f;
    f.cam1 = cam1;
    f.clamp_offset = default_clamp_offset(scene.depth);
    f.maps0 = predictor.predict(scene, key.with_slot(0));
    f.gs0 = lift_pixel_aligned(scene, f.maps0, f.clamp_offset, 0);
    f.render01 = rasterize(f.gs0, cam1, cfg.background);
    if (!cfg.aggregation) return f;
    f.aggregated = true;
    const double tau = cfg.thresholds.tau;
    f.novel.value = rendered_view_input(f.render01, cam1, tau, median_of(scene.depth.data()));
    f.novel.blocking = cfg.stop_gradient;
    f.maps1 = predictor.predict(f.novel.value, key.with_slot(1));
    f.gs1 = lift_pixel_aligned(f.novel.value, f.maps1, f.clamp_offset, 1);
    f.pair = aggregate_pair(f.gs0, f.gs1, scene.camera, cam1, tau, cfg.background, f.render01);
    f.render_hat0_in_view1 = rasterize(f.pair.view0.merged_set, cam1, cfg.background);
    f.render_hat1_in_view0 = rasterize(f.pair.view1.merged_set, scene.camera, cfg.background);
    return f;
}

LossReport canonical_gradients(Predictor& predictor, const RgbdInput& scene, const PredictorKey& key,
                               const TrainConfig& cfg) {
    scene.validate();
    const double clamp = default_clamp_offset(scene.depth);
    const AttributeMaps maps = predictor.predict(scene, key.with_slot(0));
    const GaussianSet gs0 = lift_pixel_aligned(scene, maps, clamp, 0);
    const RenderTargets render = rasterize(gs0, scene.camera, cfg.background);
    RenderUpstream up = RenderUpstream::zeros(scene.height(), scene.width());
    LossReport r;
    r.recon = recon_loss(render, scene, cfg.thresholds.tau, &up);
    r.reg = tv_loss(render.depth, &up.depth, cfg.weights.lambda_reg);
    r.weighted_total = total_loss(Branch::canonical, r, cfg.weights);
    const GradientBuffer g = rasterize_backward(gs0, scene.camera, cfg.background, up);
    const LiftGradients lg = lift_backward(scene, maps, clamp, g);
    predictor.backward(scene, key.with_slot(0), lg.maps, nullptr);
    return r;
}

LossReport cycle_gradients(Predictor& predictor, const RgbdInput& scene, const PredictorKey& key,
                           const Camera& cam1, const TrainConfig& cfg, CycleTrace* trace, const NovelSetTerm& extra) {
    const CycleForward f = cycle_forward(predictor, scene, key, cam1, cfg);
    const LossWeights& w = cfg.weights;
    const double tau = cfg.thresholds.tau;
    const Camera& cam0 = scene.camera;
    const int h = scene.height(), wd = scene.width();

    LossReport r;
    const RenderTargets& novel = f.novel_render();
    RenderUpstream up1 = RenderUpstream::zeros(cam1.height, cam1.width);
    r.reg = tv_loss(novel.depth, &up1.depth, w.lambda_reg);
    const PhotometricResult photo =
        photometric_loss(scene.image, scene.depth, novel.color, cam0, cam1, &up1.color, w.lambda_novel);
    r.photo = photo.value;
    r.photo_warning = photo.all_out_of_bounds;
    r.perp_surrogate = make_feature_loss(cfg.perceptual)
                           ->evaluate(novel.color, scene.image, &up1.color, w.lambda_novel * w.lambda_perp);
    r.clip_slot =
        make_feature_loss(cfg.clip)->evaluate(novel.color, scene.image, &up1.color, w.lambda_novel * w.lambda_clip);
    r.novel = *r.photo + w.lambda_perp * *r.perp_surrogate + w.lambda_clip * *r.clip_slot;

    RenderUpstream up0 = RenderUpstream::zeros(h, wd);
    // Without aggregation there is no novel-view set to cycle back.
    r.cycle = cfg.aggregation ? cycle_loss(f.render_hat1_in_view0, scene, tau, &up0) : 0.0;

    GradientBuffer grad_novel = rasterize_backward(f.novel_set(), cam1, cfg.background, up1);
    if (extra) r.video = extra(f, grad_novel);
    r.weighted_total = total_loss(Branch::novel, r, w);

    const std::size_t n = static_cast<std::size_t>(h) * wd;
    GradientBuffer g0(n);
    GradientBuffer via(n);
    if (cfg.aggregation) {
        const GaussianSet& hat0 = f.pair.view0.merged_set;
        const GaussianSet& hat1 = f.pair.view1.merged_set;
        const GradientBuffer grad_hat1 = rasterize_backward(hat1, cam0, cfg.background, up0);
        scatter_by_provenance(hat0, grad_novel, 0, wd, g0);
        scatter_by_provenance(hat1, grad_hat1, 0, wd, g0);
        GradientBuffer g1(static_cast<std::size_t>(cam1.height) * cam1.width);
        scatter_by_provenance(hat0, grad_novel, 1, cam1.width, g1);
        scatter_by_provenance(hat1, grad_hat1, 1, cam1.width, g1);

        const RgbdInput& input1 = f.novel.value;
        const LiftGradients lg1 = lift_backward(input1, f.maps1, f.clamp_offset, g1);
        if (f.novel.passes()) {
            InputGradient ig = InputGradient::zeros(cam1.height, cam1.width);
            predictor.backward(input1, key.with_slot(1), lg1.maps, &ig);
            ig.image += lg1.image;
            ig.depth += lg1.depth;
            const RenderUpstream up = rendered_view_input_backward(f.render01, tau, ig.image, ig.depth);
            via = rasterize_backward(f.gs0, cam1, cfg.background, up);
        } else {
            predictor.backward(input1, key.with_slot(1), lg1.maps, nullptr);
        }
    } else {
        g0 = std::move(grad_novel);
    }
    if (trace) {
        trace->gs0_direct = g0;
        trace->gs0_via_novel = via;
    }
    for (std::size_t i = 0; i < n; ++i) g0[i] += via[i];
    const LiftGradients lg0 = lift_backward(scene, f.maps0, f.clamp_offset, g0);
    predictor.backward(scene, key.with_slot(0), lg0.maps, nullptr);
    return r;
}

namespace {

bool gradients_finite(const Predictor& p) {
    for (double g : p.gradients())
        if (!std::isfinite(g)) return false;
    return true;
}

template <typename Compute>
StepResult guarded_step(Predictor& predictor, Adam& optimizer, double lr, Branch branch, Compute&& compute) {
    StepResult s;
    s.branch = branch;
    predictor.zero_grad();
    s.report = compute();
    if (!std::isfinite(s.report.weighted_total)) {
        s.error = "non-finite loss";
    } else if (!gradients_finite(predictor)) {
        s.error = "non-finite gradient";
    } else {
        optimizer.step(predictor.parameters(), predictor.gradients(), lr);
        s.applied = true;
    }
    predictor.zero_grad();
    return s;
}

} // namespace

StepResult train_step_canonical(Predictor& predictor, Adam& optimizer, const RgbdInput& scene,
                                const PredictorKey& key, const TrainConfig& cfg, double lr) {
    return guarded_step(predictor, optimizer, lr, Branch::canonical,
                        [&] { return canonical_gradients(predictor, scene, key, cfg); });
}

StepResult train_step_cycle(Predictor& predictor, Adam& optimizer, const RgbdInput& scene, const PredictorKey& key,
                            const Camera& cam1, const TrainConfig& cfg, double lr) {
    return guarded_step(predictor, optimizer, lr, Branch::novel,
                        [&] { return cycle_gradients(predictor, scene, key, cam1, cfg); });
}

std::unique_ptr<Predictor> make_initial_predictor(const TrainConfig& cfg, const std::vector<RgbdInput>& corpus) {
    if (cfg.predictor == "directfit") {
        if (corpus.empty()) throw std::invalid_argument("make_initial_predictor: DirectFit needs a corpus");
        for (const RgbdInput& s : corpus)
            if (s.height() != corpus[0].height() || s.width() != corpus[0].width())
                throw std::invalid_argument("make_initial_predictor: DirectFit needs equally sized scenes");
        return std::make_unique<DirectFit>(static_cast<int>(corpus.size()), corpus[0].height(), corpus[0].width());
    }
    if (cfg.predictor == "tinyconv") return std::make_unique<TinyConv>(cfg.hidden, cfg.seed);
    throw std::invalid_argument("make_initial_predictor: unknown predictor '" + cfg.predictor + "'");
}

// ------------------------------------------------------------------ loop

namespace {

json report_json(const LossReport& r) {
    json j = json::object();
    auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) j[name] = *v;
    };
    put("recon", r.recon);
    put("cycle", r.cycle);
    put("photo", r.photo);
    put("perp_surrogate", r.perp_surrogate);
    put("clip_slot", r.clip_slot);
    put("reg", r.reg);
    put("novel", r.novel);
    put("video", r.video);
    j["total"] = r.weighted_total;
    if (r.photo_warning) j["photo_warning"] = true;
    return j;
}

struct Loop {
    const std::vector<RgbdInput>& corpus;
    const TrainConfig& cfg;
    std::ostream* metrics;
    std::mt19937_64 rng;
    std::vector<Vec3> pivots;
    TrainingResult result;

    Loop(const std::vector<RgbdInput>& c, const TrainConfig& k, std::ostream* m, std::uint64_t seed)
        : corpus(c), cfg(k), metrics(m), rng(seed) {
        if (corpus.empty()) throw std::invalid_argument("run_training: empty corpus");
        cfg.validate();
        for (const RgbdInput& s : corpus) {
            s.validate();
            pivots.push_back(orbit_pivot(s.camera, s.depth));
        }
    }

    void emit(const json& j) {
        if (metrics) *metrics << j.dump() << '\n';
    }

    void evaluate(long step, const char* stage) {
        if (!metrics) return;
        MetricsRecord rec = evaluate_corpus(*result.predictor, corpus, cfg);
        rec.step = step;
        json j = json::parse(rec.to_json());
        j["stage"] = stage;
        j["record"] = "eval";
        emit(j);
    }

    int pick_scene() { return std::uniform_int_distribution<int>(0, static_cast<int>(corpus.size()) - 1)(rng); }

    void stage_one() {
        Adam adam(result.predictor->parameters().size());
        for (int step = 0; step < cfg.steps; ++step) {
            const int idx = pick_scene();
            const bool canonical = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.branch_mix;
            const RgbdInput& scene = corpus[idx];
            json j = {{"record", "step"}, {"stage", "one"}, {"step", step}, {"scene", idx}};
            StepResult s;
            if (canonical) {
                s = train_step_canonical(*result.predictor, adam, scene, {idx, 0}, cfg, cfg.base_lr);
                j["branch"] = "canonical";
            } else {
                const OrbitSample cam = sample_novel_camera(scene.camera, pivots[idx], cfg.sampler, rng);
                s = train_step_cycle(*result.predictor, adam, scene, {idx, 0}, cam.camera, cfg, cfg.base_lr);
                j["branch"] = "novel";
                j["yaw"] = cam.yaw;
                j["pitch"] = cam.pitch;
            }
            record(j, s.report, s.applied, s.error);
            if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) evaluate(step + 1, "one");
        }
    }

    void stage_two() {
        Adam adam(result.predictor->parameters().size());
        for (int step = 0; step < cfg.refine_steps; ++step) {
            const int idx = pick_scene();
            const RgbdInput& scene = corpus[idx];
            const OrbitSample cam = sample_novel_camera(scene.camera, pivots[idx], cfg.sampler, rng);
            const RefineReport s =
                refine_step(*result.predictor, adam, scene, {idx, 0}, cam.camera, cfg, cfg.refine_lr_scale);
            json j = {{"record", "step"}, {"stage", "two"}, {"step", step}, {"scene", idx},
                      {"branch", "novel"}, {"yaw", cam.yaw}, {"pitch", cam.pitch},
                      {"arc_mask_popcount", s.arc_mask_popcount}};
            record(j, s.report, s.applied, s.error);
            if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) evaluate(step + 1, "two");
        }
    }

    void record(json& j, const LossReport& r, bool applied, const std::string& error) {
        j["losses"] = report_json(r);
        if (applied) {
            ++result.steps_applied;
        } else {
            ++result.steps_aborted;
            j["aborted"] = error;
        }
        emit(j);
    }
};

} // namespace

TrainingResult run_training(const std::vector<RgbdInput>& corpus, const TrainConfig& cfg, std::ostream* metrics,
                            const Predictor* initial) {
    Loop loop(corpus, cfg, metrics, cfg.seed);
    loop.result.predictor = initial ? initial->clone() : make_initial_predictor(cfg, corpus);
    loop.stage_one();
    loop.stage_two();
    if (cfg.eval_every == 0) loop.evaluate(static_cast<long>(cfg.steps) + cfg.refine_steps, "final");
    return std::move(loop.result);
}

TrainingResult run_refinement(const std::vector<RgbdInput>& corpus, const TrainConfig& cfg, std::ostream* metrics,
                              const Predictor& initial) {
    Loop loop(corpus, cfg, metrics, cfg.seed);
    loop.result.predictor = initial.clone();
    loop.stage_two();
    if (cfg.eval_every == 0) loop.evaluate(cfg.refine_steps, "final");
    return std::move(loop.result);
}

// ------------------------------------------------------------------ config

std::string config_to_json(const TrainConfig& c) {
    const json j = {
        {"predictor", c.predictor},
        {"hidden", c.hidden},
        {"steps", c.steps},
        {"refine_steps", c.refine_steps},
        {"base_lr", c.base_lr},
        {"refine_lr_scale", c.refine_lr_scale},
        {"branch_mix", c.branch_mix},
        {"aggregation", c.aggregation},
        {"stop_gradient", c.stop_gradient},
        {"lambda_reg", c.weights.lambda_reg},
        {"lambda_novel", c.weights.lambda_novel},
        {"lambda_perp", c.weights.lambda_perp},
        {"lambda_clip", c.weights.lambda_clip},
        {"tau", c.thresholds.tau},
        {"tau_theta", c.thresholds.tau_theta},
        {"tau_artifact", c.thresholds.tau_artifact},
        {"yaw_spread", c.sampler.yaw_spread},
        {"pitch_spread", c.sampler.pitch_spread},
        {"perceptual", c.perceptual},
        {"clip", c.clip},
        {"background", {c.background.x(), c.background.y(), c.background.z()}},
        {"seed", c.seed},
        {"arc_frames", c.arc_frames},
        {"eval_every", c.eval_every},
    };
    return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "predictor") c.predictor = value.get<std::string>();
            else if (key == "hidden") c.hidden = value.get<int>();
            else if (key == "steps") c.steps = value.get<int>();
            else if (key == "refine_steps") c.refine_steps = value.get<int>();
            else if (key == "base_lr") c.base_lr = value.get<double>();
            else if (key == "refine_lr_scale") c.refine_lr_scale = value.get<double>();
            else if (key == "branch_mix") c.branch_mix = value.get<double>();
            else if (key == "aggregation") c.aggregation = value.get<bool>();
            else if (key == "stop_gradient") c.stop_gradient = value.get<bool>();
            else if (key == "lambda_reg") c.weights.lambda_reg = value.get<double>();
            else if (key == "lambda_novel") c.weights.lambda_novel = value.get<double>();
            else if (key == "lambda_perp") c.weights.lambda_perp = value.get<double>();
            else if (key == "lambda_clip") c.weights.lambda_clip = value.get<double>();
            else if (key == "tau") c.thresholds.tau = value.get<double>();
            else if (key == "tau_theta") c.thresholds.tau_theta = value.get<double>();
            else if (key == "tau_artifact") c.thresholds.tau_artifact = value.get<double>();
            else if (key == "yaw_spread") c.sampler.yaw_spread = value.get<double>();
            else if (key == "pitch_spread") c.sampler.pitch_spread = value.get<double>();
            else if (key == "perceptual") c.perceptual = value.get<std::string>();
            else if (key == "clip") c.clip = value.get<std::string>();
            else if (key == "background") {
                const auto b = value.get<std::vector<double>>();
                if (b.size() != 3) throw std::invalid_argument("background needs three values");
                c.background = Vec3(b[0], b[1], b[2]);
            } else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "arc_frames") c.arc_frames = value.get<int>();
            else if (key == "eval_every") c.eval_every = value.get<int>();
            else throw std::invalid_argument("unknown key");
        } catch (const std::exception& e) {
            throw std::invalid_argument("config: bad value for '" + key + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

// ------------------------------------------------------------------ checkpoint

namespace {

constexpr char kMagic[8] = {'M', 'S', 'P', 'L', 'A', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_i64(std::ostream& out, std::int64_t v) {
    const auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((u >> (8 * i)) & 0xFF));
}

std::uint64_t get_bytes(std::istream& in, int n, const std::string& path) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw std::runtime_error("checkpoint " + path + ": truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

std::string get_string(std::istream& in, const std::string& path) {
    const auto len = static_cast<std::size_t>(get_bytes(in, 4, path));
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(in.gcount()) != len) throw std::runtime_error("checkpoint " + path + ": truncated");
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Predictor& predictor, const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    const std::string id = predictor.id();
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    const auto shapes = predictor.tensor_shapes();
    put_u32(out, static_cast<std::uint32_t>(shapes.size()));
    for (const auto& shape : shapes) {
        put_u32(out, static_cast<std::uint32_t>(shape.size()));
        for (std::int64_t d : shape) put_i64(out, d);
    }
    for (double p : predictor.parameters()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p)));
    const std::string config = config_to_json(cfg);
    put_u32(out, static_cast<std::uint32_t>(config.size()));
    out.write(config.data(), static_cast<std::streamsize>(config.size()));
    if (!out) throw std::runtime_error("error while writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("checkpoint " + path + ": bad magic");
    }
    const auto version = static_cast<std::uint32_t>(get_bytes(in, 4, path));
    if (version != kVersion) throw std::runtime_error("checkpoint " + path + ": unsupported version " + std::to_string(version));
    const std::string id = get_string(in, path);
    const auto count = get_bytes(in, 4, path);
    std::vector<std::vector<std::int64_t>> shapes(count);
    for (auto& shape : shapes) {
        shape.resize(get_bytes(in, 4, path));
        for (auto& d : shape) d = static_cast<std::int64_t>(get_bytes(in, 8, path));
    }
    Checkpoint ck;
    ck.predictor = make_predictor(id, shapes);
    for (double& p : ck.predictor->parameters())
        p = std::bit_cast<float>(static_cast<std::uint32_t>(get_bytes(in, 4, path)));
    ck.config = config_from_json(get_string(in, path));
    return ck;
}

} // namespace monosplat
