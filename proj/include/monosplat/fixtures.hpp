#pragma once

#include "monosplat/core.hpp"
#include "monosplat/io.hpp"
#include "monosplat/lift.hpp"
#include "monosplat/predictor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace monosplat {

/// Gently tilted plane with low-frequency color, focal length = size.
RgbdInput smooth_scene(int size = 64, std::uint64_t seed = 0);

/// Steeper plane with four times the color frequency of smooth_scene.
RgbdInput textured_scene(int size = 64, std::uint64_t seed = 0);

/// Textured background plane at depth ~3 and a fronto-parallel square at
/// depth ~1.5 hiding part of it.
RgbdInput occluder_scene(int size = 32, std::uint64_t seed = 0);

std::vector<RgbdInput> occluder_corpus(int count, int size = 32, std::uint64_t seed = 0);

struct RandomSceneOptions {
    int count = 20;
    double min_depth = 2.0;
    double max_depth = 5.0;
    double min_log_scale = -2.5;
    double max_log_scale = -1.5;
    double min_opacity_raw = -1.5;
    double max_opacity_raw = 1.0;
};

/// Random primitives inside the camera frustum with stratified depths.
GaussianSet random_scene(const Camera& cam, const RandomSceneOptions& opt, std::mt19937_64& rng);

struct PixelRect {
    int row = 0;
    int col = 0;
    int rows = 0;
    int cols = 0;
};

/// Adds `opacity_shift` to the opacity_raw entries of `rect` in the
/// canonical-slot table of `key`, leaving a translucent patch. A positive
/// `novel_margin` also seeds the rendered-view slot over `rect` grown by that
/// many pixels, so aggregation cannot cover the patch.
void seed_artifact(DirectFit& model, const PredictorKey& key, const PixelRect& rect, double opacity_shift,
                   int novel_margin = 0);

/// Writes each scene as a 16-bit color PNG and a 16-bit depth PNG plus a
/// manifest named manifest.json inside `dir`. Returns the manifest path.
std::string write_fixture_corpus(const std::string& dir, const std::vector<RgbdInput>& scenes,
                                 double depth_scale = 1e-3);

} // namespace monosplat
