// monosplat command line: training, refinement, evaluation and inspection.

#include "monosplat/aggregate.hpp"
#include "monosplat/fixtures.hpp"
#include "monosplat/gradcheck.hpp"
#include "monosplat/io.hpp"
#include "monosplat/metrics.hpp"
#include "monosplat/predictor.hpp"
#include "monosplat/raster.hpp"
#include "monosplat/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fs = std::filesystem;
using namespace monosplat;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<RgbdInput> load_scenes(const std::string& manifest_path) {
    std::vector<std::string> warnings;
    std::vector<RgbdInput> corpus = load_corpus(load_manifest(manifest_path), &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
    if (corpus.empty()) throw std::runtime_error("manifest '" + manifest_path + "' lists no scenes");
    return corpus;
}

const RgbdInput& pick_scene(const std::vector<RgbdInput>& corpus, int index) {
    if (index < 0 || index >= static_cast<int>(corpus.size())) {
        throw std::runtime_error("scene index " + std::to_string(index) + " out of range (manifest has " +
                                 std::to_string(corpus.size()) + ")");
    }
    return corpus[index];
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

/// Normals in [-1, 1] mapped to [0, 1] for viewing.
Image normal_image(const Image& normals) {
    Image out = normals;
    for (double& x : out.data()) x = 0.5 * (x + 1.0);
    return out;
}

std::string frame_name(int k, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "frame_%03d_%s.png", k, suffix);
    return buf;
}

void report_training(const TrainingResult& r) {
    std::cout << "steps applied " << r.steps_applied << ", aborted " << r.steps_aborted << '\n';
}

int cmd_fit(const std::string& manifest, const std::string& config, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed) {
    TrainConfig cfg = config_from_json(read_text(config));
    if (seed) cfg.seed = *seed;
    const std::vector<RgbdInput> corpus = load_scenes(manifest);
    fs::create_directories(out_dir);
    std::ofstream metrics = open_out(fs::path(out_dir) / "metrics.jsonl");
    const TrainingResult r = run_training(corpus, cfg, &metrics);
    save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), *r.predictor, cfg);
    report_training(r);
    return 0;
}

int cmd_refine(const std::string& ckpt, const std::string& manifest, const std::string& out_dir,
               const std::optional<int>& steps, const std::optional<std::uint64_t>& seed) {
    Checkpoint c = load_checkpoint(ckpt);
    if (steps) c.config.refine_steps = *steps;
    if (seed) c.config.seed = *seed;
    c.config.validate();
    const std::vector<RgbdInput> corpus = load_scenes(manifest);
    fs::create_directories(out_dir);
    std::ofstream metrics = open_out(fs::path(out_dir) / "metrics.jsonl");
    const TrainingResult r = run_refinement(corpus, c.config, &metrics, *c.predictor);
    save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), *r.predictor, c.config);
    report_training(r);
    return 0;
}

int cmd_render_orbit(const std::string& ckpt, const std::string& manifest, int scene_index, int frames,
                     double yaw_max, const std::string& out_dir, bool aggregate) {
    if (frames < 1) throw std::runtime_error("--frames must be at least 1");
    const Checkpoint c = load_checkpoint(ckpt);
    const std::vector<RgbdInput> corpus = load_scenes(manifest);
    const RgbdInput& scene = pick_scene(corpus, scene_index);
    const TrainConfig& cfg = c.config;
    const PredictorKey key{scene_index, 0};
    const GaussianSet gs0 = lift_pixel_aligned(scene, c.predictor->predict(scene, key),
                                               default_clamp_offset(scene.depth), 0);
    const Vec3 pivot = orbit_pivot(scene.camera, scene.depth);
    fs::create_directories(out_dir);
    nlohmann::json index = nlohmann::json::array();
    for (int k = 0; k < frames; ++k) {
        const double yaw = frames == 1 ? 0.0 : yaw_max * k / (frames - 1);
        const Camera cam = orbit_camera(scene.camera, pivot, yaw, 0.0);
        const bool canonical = yaw == 0.0;
        const GaussianSet set = (aggregate && !canonical)
                                    ? inference_aggregate(scene, *c.predictor, key, cam, cfg.thresholds.tau,
                                                          cfg.background)
                                    : gs0;
        const RenderTargets r = rasterize(set, cam, cfg.background);
        const fs::path dir(out_dir);
        save_color_png((dir / frame_name(k, "rgb")).string(), r.color, 8);
        save_depth_png16((dir / frame_name(k, "depth")).string(), r.depth, 1e-3);
        save_color_png((dir / frame_name(k, "normal")).string(), normal_image(normals_from_depth(r.depth, cam)), 8);
        index.push_back({{"frame", k},
                         {"yaw", yaw},
                         {"hole_coverage", hole_coverage(r.alpha, cfg.thresholds.tau)},
                         {"primitives", set.size()}});
    }
    std::ofstream idx = open_out(fs::path(out_dir) / "frames.json");
    idx << index.dump(2) << '\n';
    std::cout << "wrote " << frames << " frames to " << out_dir << '\n';
    return 0;
}

int cmd_aggregate(const std::string& ckpt, const std::string& manifest, int scene_index, double yaw) {
    const Checkpoint c = load_checkpoint(ckpt);
    const std::vector<RgbdInput> corpus = load_scenes(manifest);
    const RgbdInput& scene = pick_scene(corpus, scene_index);
    const TrainConfig& cfg = c.config;
    const Camera cam = orbit_camera(scene.camera, orbit_pivot(scene.camera, scene.depth), yaw, 0.0);
    const InferenceResult inf =
        inference_aggregate_full(scene, *c.predictor, {scene_index, 0}, cam, cfg.thresholds.tau, cfg.background);
    const double before = hole_coverage(rasterize(inf.gs0, cam, cfg.background).alpha, cfg.thresholds.tau);
    const double after = hole_coverage(rasterize(inf.merged(), cam, cfg.background).alpha, cfg.thresholds.tau);
    nlohmann::json j;
    j["scene"] = scene_index;
    j["yaw"] = yaw;
    j["donor_count"] = inf.pair.view0.donor_count;
    j["hole_coverage_before"] = before;
    j["hole_coverage_after"] = after;
    std::cout << j.dump() << '\n';
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const std::string& out) {
    const Checkpoint c = load_checkpoint(ckpt);
    const std::vector<RgbdInput> corpus = load_scenes(manifest);
    const MetricsRecord rec = evaluate_corpus(*c.predictor, corpus, c.config);
    const std::string line = rec.to_json();
    std::cout << line << '\n';
    if (!out.empty()) open_out(out) << line << '\n';
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int scenes) {
    GradcheckOptions opt;
    opt.scenes = scenes;
    const GradcheckReport r = run_raster_gradcheck(seed, opt);
    std::cout << "checked " << r.checked << " coordinates (position " << r.position << ", color " << r.color
              << ", opacity " << r.opacity << ", scale " << r.scale << ", rotation " << r.rotation << "), skipped "
              << r.skipped << ", worst relative error " << r.worst_relative_error << '\n';
    for (const GradcheckFailure& f : r.failures) {
        std::cout << "  scene " << f.scene << " primitive " << f.primitive << ' ' << f.parameter << ": analytic "
                  << f.analytic << " numeric " << f.numeric << '\n';
    }
    std::cout << (r.passed() ? "gradcheck passed" : "gradcheck FAILED") << '\n';
    return r.passed() ? 0 : 1;
}

int cmd_synth(const std::string& kind, int count, int size, std::uint64_t seed, const std::string& out_dir) {
    if (count < 1) throw std::runtime_error("--count must be at least 1");
    std::vector<RgbdInput> scenes;
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        if (kind == "occluder") scenes.push_back(occluder_scene(size, s));
        else if (kind == "smooth") scenes.push_back(smooth_scene(size, s));
        else if (kind == "textured") scenes.push_back(textured_scene(size, s));
        else throw std::runtime_error("unknown scene kind '" + kind + "'");
    }
    std::cout << write_fixture_corpus(out_dir, scenes) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-view Gaussian splat prediction with cycle aggregation"};
    app.require_subcommand(1);

    std::string manifest, config, out, ckpt, kind = "occluder";
    int scene = 0, frames = 16, steps_arg = -1, scenes = 20, count = 4, size = 32;
    double yaw_max = 0.52, yaw = 0.52;
    std::uint64_t seed = 0;
    bool no_aggregate = false;

    CLI::App* fit = app.add_subcommand("fit", "stage one (and stage two if refine_steps > 0)");
    fit->add_option("--manifest", manifest, "scene manifest")->required();
    fit->add_option("--config", config, "training config")->required();
    fit->add_option("--out", out, "output directory")->required();
    CLI::Option* fit_seed = fit->add_option("--seed", seed, "override the config seed");

    CLI::App* refine = app.add_subcommand("refine", "stage two only");
    refine->add_option("--ckpt", ckpt, "checkpoint")->required();
    refine->add_option("--manifest", manifest, "scene manifest")->required();
    refine->add_option("--out", out, "output directory")->required();
    CLI::Option* refine_steps = refine->add_option("--steps", steps_arg, "override refine_steps");
    CLI::Option* refine_seed = refine->add_option("--seed", seed, "override the config seed");

    CLI::App* orbit = app.add_subcommand("render-orbit", "render a yaw sweep");
    orbit->add_option("--ckpt", ckpt, "checkpoint")->required();
    orbit->add_option("--manifest", manifest, "scene manifest")->required();
    orbit->add_option("--scene", scene, "scene index");
    orbit->add_option("--frames", frames, "number of frames");
    orbit->add_option("--yaw-max", yaw_max, "final yaw, radians");
    orbit->add_option("--out", out, "output directory")->required();
    orbit->add_flag("--no-aggregate", no_aggregate, "render the single-view set only");

    CLI::App* agg = app.add_subcommand("aggregate", "two-view aggregation report");
    agg->add_option("--ckpt", ckpt, "checkpoint")->required();
    agg->add_option("--manifest", manifest, "scene manifest")->required();
    agg->add_option("--scene", scene, "scene index");
    agg->add_option("--yaw", yaw, "novel-view yaw, radians");

    CLI::App* eval = app.add_subcommand("eval", "metrics over a manifest");
    eval->add_option("--ckpt", ckpt, "checkpoint")->required();
    eval->add_option("--manifest", manifest, "scene manifest")->required();
    eval->add_option("--out", out, "also write the record here");

    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of the rasterizer backward pass");
    grad->add_option("--seed", seed, "scene seed");
    grad->add_option("--scenes", scenes, "number of random scenes");

    CLI::App* synth = app.add_subcommand("synth", "write a synthetic RGB-D corpus");
    synth->add_option("--kind", kind, "occluder, smooth or textured");
    synth->add_option("--count", count, "number of scenes");
    synth->add_option("--size", size, "image side in pixels");
    synth->add_option("--seed", seed, "first scene seed");
    synth->add_option("--out", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) return cmd_fit(manifest, config, out, *fit_seed ? std::optional(seed) : std::nullopt);
        if (*refine) {
            return cmd_refine(ckpt, manifest, out, *refine_steps ? std::optional(steps_arg) : std::nullopt,
                              *refine_seed ? std::optional(seed) : std::nullopt);
        }
        if (*orbit) return cmd_render_orbit(ckpt, manifest, scene, frames, yaw_max, out, !no_aggregate);
        if (*agg) return cmd_aggregate(ckpt, manifest, scene, yaw);
        if (*eval) return cmd_eval(ckpt, manifest, out);
        if (*grad) return cmd_gradcheck(seed, scenes);
        if (*synth) return cmd_synth(kind, count, size, seed, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
