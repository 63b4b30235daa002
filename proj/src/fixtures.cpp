#include "monosplat/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace monosplat {

namespace fs = std::filesystem;

namespace {

RgbdInput plane_scene(int size, std::uint64_t seed, double tilt, double frequency) {
    if (size < 2) throw std::invalid_argument("plane scene: size must be at least 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double p0 = phase(rng), p1 = phase(rng), p2 = phase(rng);
    RgbdInput s;
    s.camera = Camera::centered(size, size, size);
    s.image = Image(size, size, 3);
    s.depth = Image(size, size, 1);
    for (int v = 0; v < size; ++v)
        for (int u = 0; u < size; ++u) {
            const double x = (u - s.camera.cx) / size, y = (v - s.camera.cy) / size;
            s.depth.at(v, u) = 3.0 / (1.0 - tilt * x - 0.6 * tilt * y);
            s.image.at(v, u, 0) = 0.5 + 0.3 * std::sin(frequency * kPi * x + p0);
            s.image.at(v, u, 1) = 0.5 + 0.3 * std::sin(frequency * kPi * y + p1);
            s.image.at(v, u, 2) = 0.5 + 0.2 * std::cos(0.5 * frequency * kPi * (x + y) + p2);
        }
    return s;
}

} // namespace

RgbdInput smooth_scene(int size, std::uint64_t seed) { return plane_scene(size, seed, 0.1, 1.0); }

RgbdInput textured_scene(int size, std::uint64_t seed) { return plane_scene(size, seed, 0.25, 4.0); }

RgbdInput occluder_scene(int size, std::uint64_t seed) {
    if (size < 8) throw std::invalid_argument("occluder_scene: size must be at least 8");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double bg_phase = 2.0 * kPi * unit(rng);
    const Vec3 fg_color(0.75 + 0.2 * unit(rng), 0.25 + 0.2 * unit(rng), 0.15 + 0.2 * unit(rng));
    const double bg_depth = 2.8 + 0.4 * unit(rng);
    const double fg_depth = 1.4 + 0.2 * unit(rng);
    const int side = static_cast<int>(std::lround(size * (0.35 + 0.1 * unit(rng))));
    const int shift = static_cast<int>(std::lround((unit(rng) - 0.5) * size * 0.15));
    const int r0 = (size - side) / 2 + shift, c0 = (size - side) / 2 - shift;

    RgbdInput s;
    s.camera = Camera::centered(size, size, size);
    s.image = Image(size, size, 3);
    s.depth = Image(size, size, 1);
    for (int v = 0; v < size; ++v)
        for (int u = 0; u < size; ++u) {
            const bool fg = v >= r0 && v < r0 + side && u >= c0 && u < c0 + side;
            const double x = static_cast<double>(u) / size, y = static_cast<double>(v) / size;
            if (fg) {
                s.depth.at(v, u) = fg_depth;
                for (int c = 0; c < 3; ++c) s.image.at(v, u, c) = fg_color[c];
            } else {
                s.depth.at(v, u) = bg_depth;
                s.image.at(v, u, 0) = 0.2 + 0.15 * std::sin(4.0 * kPi * x + bg_phase);
                s.image.at(v, u, 1) = 0.45 + 0.25 * y;
                s.image.at(v, u, 2) = 0.6 + 0.15 * std::cos(4.0 * kPi * y + bg_phase);
            }
        }
    return s;
}

std::vector<RgbdInput> occluder_corpus(int count, int size, std::uint64_t seed) {
    std::vector<RgbdInput> out;
    for (int i = 0; i < count; ++i) out.push_back(occluder_scene(size, seed * 1000003ULL + static_cast<std::uint64_t>(i)));
    return out;
}

GaussianSet random_scene(const Camera& cam, const RandomSceneOptions& opt, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    // Stratified depths keep every pair of primitives apart along the view axis.
    std::vector<double> depths(opt.count);
    const double slot = (opt.max_depth - opt.min_depth) / std::max(1, opt.count);
    for (int i = 0; i < opt.count; ++i) depths[i] = opt.min_depth + slot * (i + 0.1 + 0.8 * unit(rng));
    std::shuffle(depths.begin(), depths.end(), rng);
    const RigidTransform to_world = cam.camera_to_world();
    GaussianSet set;
    for (int i = 0; i < opt.count; ++i) {
        GaussianPrimitive p;
        const double z = depths[i];
        const double u = in(0.1, 0.9) * (cam.width - 1), v = in(0.1, 0.9) * (cam.height - 1);
        p.position = to_world.apply(Vec3(z * (u - cam.cx) / cam.fx, z * (v - cam.cy) / cam.fy, z));
        p.color = Vec3(unit(rng), unit(rng), unit(rng));
        p.opacity_raw = in(opt.min_opacity_raw, opt.max_opacity_raw);
        p.log_scale = Vec3(in(opt.min_log_scale, opt.max_log_scale), in(opt.min_log_scale, opt.max_log_scale),
                           in(opt.min_log_scale, opt.max_log_scale));
        p.rotation = Vec4(in(-1, 1), in(-1, 1), in(-1, 1), in(-1, 1));
        if (p.rotation.norm() < 0.1) p.rotation = Vec4(1, 0, 0, 0);
        set.push_back(p, {0, 0, 0});
    }
    return set;
}

void seed_artifact(DirectFit& model, const PredictorKey& key, const PixelRect& rect, double opacity_shift,
                   int novel_margin) {
    constexpr int kOpacityChannel = 6;
    const int h = model.height(), w = model.width();
    auto shift = [&](int slot, int row0, int row1, int col0, int col1) {
        for (int v = std::max(0, row0); v < std::min(h, row1); ++v)
            for (int u = std::max(0, col0); u < std::min(w, col1); ++u)
                model.parameters()[model.index(key.with_slot(slot), v, u, kOpacityChannel)] += opacity_shift;
    };
    shift(0, rect.row, rect.row + rect.rows, rect.col, rect.col + rect.cols);
    if (novel_margin > 0) {
        shift(1, rect.row - novel_margin, rect.row + rect.rows + novel_margin, rect.col - novel_margin,
              rect.col + rect.cols + novel_margin);
    }
}

std::string write_fixture_corpus(const std::string& dir, const std::vector<RgbdInput>& scenes, double depth_scale) {
    fs::create_directories(dir);
    SceneManifest m;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const std::string stem = "scene_" + std::to_string(i);
        SceneEntry e;
        e.image_path = (fs::path(dir) / (stem + "_rgb.png")).string();
        e.depth_path = (fs::path(dir) / (stem + "_depth.png")).string();
        e.fx = scenes[i].camera.fx;
        e.fy = scenes[i].camera.fy;
        e.cx = scenes[i].camera.cx;
        e.cy = scenes[i].camera.cy;
        e.depth_scale = depth_scale;
        save_color_png(e.image_path, scenes[i].image, 16);
        save_depth_png16(e.depth_path, scenes[i].depth, depth_scale);
        m.entries.push_back(e);
    }
    const std::string path = (fs::path(dir) / "manifest.json").string();
    save_manifest(path, m);
    return path;
}

} // namespace monosplat
