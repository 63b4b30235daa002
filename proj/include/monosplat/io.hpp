#pragma once

#include "monosplat/image.hpp"
#include "monosplat/lift.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace monosplat {

struct SceneEntry {
    std::string image_path;
    std::string depth_path;
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    double depth_scale = 1.0;
};

struct SceneManifest {
    std::vector<SceneEntry> entries;
};

/// Reads {"scenes": [{"image", "depth", "fx", "fy", "cx", "cy", "depth_scale"}]}.
/// Relative paths are resolved against the manifest's directory.
SceneManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SceneManifest& manifest);

/// Decoded PNG samples, row-major and interleaved.
struct RawRaster {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint16_t> samples;
};

RawRaster read_png(const std::string& path);
void write_png(const std::string& path, const RawRaster& raster);

/// Single-channel portable float map.
Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& depth);

/// 8- or 16-bit RGB (gray is replicated, alpha dropped) scaled to [0, 1].
Image load_color_png(const std::string& path);
/// Clamped to [0, 1] and rounded to the given bit depth.
void save_color_png(const std::string& path, const Image& image, int bit_depth = 8);

/// Depth from a gray PNG (raw value x depth_scale) or a .pfm file (value x depth_scale).
Image load_depth(const std::string& path, double depth_scale);
/// 16-bit gray PNG holding round(depth / depth_scale).
void save_depth_png16(const std::string& path, const Image& depth, double depth_scale);

/// Loads one scene. Non-positive depths are replaced by the 1st percentile of
/// the positive ones; a message per fix is appended to `warnings`.
RgbdInput load_scene(const SceneEntry& entry, std::vector<std::string>* warnings = nullptr);

std::vector<RgbdInput> load_corpus(const SceneManifest& manifest, std::vector<std::string>* warnings = nullptr);

} // namespace monosplat
