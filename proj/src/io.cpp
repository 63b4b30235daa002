#include "monosplat/io.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace monosplat {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ manifest

SceneManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("manifest " + path + ": " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    SceneManifest m;
    if (!j.contains("scenes") || !j["scenes"].is_array()) {
        throw std::runtime_error("manifest " + path + ": expected a 'scenes' array");
    }
    for (const json& s : j["scenes"]) {
        try {
            SceneEntry e;
            e.image_path = resolve(s.at("image").get<std::string>());
            e.depth_path = resolve(s.at("depth").get<std::string>());
            e.fx = s.at("fx").get<double>();
            e.fy = s.at("fy").get<double>();
            e.cx = s.at("cx").get<double>();
            e.cy = s.at("cy").get<double>();
            e.depth_scale = s.value("depth_scale", 1.0);
            if (!(e.depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
            m.entries.push_back(e);
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest " + path + ": " + e.what());
        }
    }
    return m;
}

void save_manifest(const std::string& path, const SceneManifest& manifest) {
    const fs::path base = fs::path(path).parent_path();
    json scenes = json::array();
    for (const SceneEntry& e : manifest.entries) {
        auto rel = [&](const std::string& p) {
            return base.empty() ? p : fs::relative(fs::path(p), base).string();
        };
        scenes.push_back({{"image", rel(e.image_path)},
                          {"depth", rel(e.depth_path)},
                          {"fx", e.fx},
                          {"fy", e.fy},
                          {"cx", e.cx},
                          {"cy", e.cy},
                          {"depth_scale", e.depth_scale}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path);
    out << json{{"scenes", scenes}}.dump(2) << '\n';
}

// ------------------------------------------------------------------ PNG

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_handler(png_structp png, png_const_charp msg) {
    auto* buf = static_cast<char*>(png_get_error_ptr(png));
    std::snprintf(buf, 256, "%s", msg);
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// Only trivially destructible locals live in the setjmp frames.
bool decode_png(std::FILE* file, RawRaster* out, char* err) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_handler, png_warning_handler);
    if (!png) {
        std::snprintf(err, 256, "out of memory");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, file);
    png_read_info(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);
    out->width = static_cast<int>(png_get_image_width(png, info));
    out->height = static_cast<int>(png_get_image_height(png, info));
    out->channels = png_get_channels(png, info);
    out->bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out->samples.assign(static_cast<std::size_t>(out->width) * out->height * out->channels, 0);
    png_bytep row = static_cast<png_bytep>(png_malloc(png, rowbytes));
    const std::size_t per_row = static_cast<std::size_t>(out->width) * out->channels;
    for (int y = 0; y < out->height; ++y) {
        png_read_row(png, row, nullptr);
        std::uint16_t* dst = out->samples.data() + y * per_row;
        if (out->bit_depth == 16) {
            for (std::size_t i = 0; i < per_row; ++i) dst[i] = static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
        } else {
            for (std::size_t i = 0; i < per_row; ++i) dst[i] = row[i];
        }
    }
    png_free(png, row);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

bool encode_png(std::FILE* file, const RawRaster* in, char* err) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_handler, png_warning_handler);
    if (!png) {
        std::snprintf(err, 256, "out of memory");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    png_bytep volatile row = nullptr;
    if (!info || setjmp(png_jmpbuf(png))) {
        if (row) png_free(png, row);
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, file);
    const int color_type = in->channels == 1   ? PNG_COLOR_TYPE_GRAY
                           : in->channels == 2 ? PNG_COLOR_TYPE_GRAY_ALPHA
                           : in->channels == 3 ? PNG_COLOR_TYPE_RGB
                                               : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, in->width, in->height, in->bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t per_row = static_cast<std::size_t>(in->width) * in->channels;
    row = static_cast<png_bytep>(png_malloc(png, per_row * (in->bit_depth == 16 ? 2 : 1)));
    for (int y = 0; y < in->height; ++y) {
        const std::uint16_t* src = in->samples.data() + y * per_row;
        if (in->bit_depth == 16) {
            for (std::size_t i = 0; i < per_row; ++i) {
                row[2 * i] = static_cast<png_byte>(src[i] >> 8);
                row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xFF);
            }
        } else {
            for (std::size_t i = 0; i < per_row; ++i) row[i] = static_cast<png_byte>(src[i]);
        }
        png_write_row(png, row);
    }
    png_free(png, row);
    row = nullptr;
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

} // namespace

RawRaster read_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw std::runtime_error("cannot open " + path);
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw std::runtime_error(path + ": not a PNG file");
    }
    std::rewind(file.get());
    RawRaster raster;
    char err[256] = {0};
    if (!decode_png(file.get(), &raster, err)) throw std::runtime_error(path + ": " + err);
    return raster;
}

void write_png(const std::string& path, const RawRaster& raster) {
    if (raster.channels < 1 || raster.channels > 4 || (raster.bit_depth != 8 && raster.bit_depth != 16) ||
        raster.samples.size() != static_cast<std::size_t>(raster.width) * raster.height * raster.channels) {
        throw std::invalid_argument("write_png: inconsistent raster for " + path);
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw std::runtime_error("cannot write " + path);
    char err[256] = {0};
    if (!encode_png(file.get(), &raster, err)) throw std::runtime_error(path + ": " + err);
}

// ------------------------------------------------------------------ PFM

Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    in.get();
    if (magic != "Pf" || width <= 0 || height <= 0 || scale == 0.0) {
        throw std::runtime_error(path + ": not a single-channel PFM file");
    }
    const bool little = scale < 0.0;
    Image out(height, width, 1);
    for (int row = height - 1; row >= 0; --row)
        for (int col = 0; col < width; ++col) {
            unsigned char b[4];
            if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(path + ": truncated PFM data");
            const std::uint32_t bits = little ? (b[0] | b[1] << 8 | b[2] << 16 | static_cast<std::uint32_t>(b[3]) << 24)
                                              : (b[3] | b[2] << 8 | b[1] << 16 | static_cast<std::uint32_t>(b[0]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            out.at(row, col) = f;
        }
    return out;
}

void write_pfm(const std::string& path, const Image& depth) {
    if (depth.channels() != 1) throw std::invalid_argument("write_pfm: expected one channel");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "Pf\n" << depth.width() << ' ' << depth.height() << "\n-1.0\n";
    for (int row = depth.height() - 1; row >= 0; --row)
        for (int col = 0; col < depth.width(); ++col) {
            const float f = static_cast<float>(depth.at(row, col));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            for (int i = 0; i < 4; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
        }
}

// ------------------------------------------------------------------ images

Image load_color_png(const std::string& path) {
    const RawRaster r = read_png(path);
    const double maxv = r.bit_depth == 16 ? 65535.0 : 255.0;
    Image out(r.height, r.width, 3);
    const int color_channels = (r.channels >= 3) ? 3 : 1;
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const int src = color_channels == 3 ? c : 0;
                out.at(y, x, c) = r.samples[(static_cast<std::size_t>(y) * r.width + x) * r.channels + src] / maxv;
            }
    return out;
}

void save_color_png(const std::string& path, const Image& image, int bit_depth) {
    if (image.channels() != 3) throw std::invalid_argument("save_color_png: expected three channels");
    if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("save_color_png: bit depth must be 8 or 16");
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    RawRaster r{image.width(), image.height(), 3, bit_depth, {}};
    r.samples.reserve(image.size());
    for (double v : image.data()) r.samples.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxv)));
    write_png(path, r);
}

Image load_depth(const std::string& path, double depth_scale) {
    if (!(depth_scale > 0.0)) throw std::invalid_argument("load_depth: depth_scale must be positive");
    if (fs::path(path).extension() == ".pfm") {
        Image d = read_pfm(path);
        for (double& v : d.data()) v *= depth_scale;
        return d;
    }
    const RawRaster r = read_png(path);
    if (r.channels != 1) throw std::runtime_error(path + ": depth PNG must be single-channel gray");
    Image d(r.height, r.width, 1);
    for (std::size_t i = 0; i < r.samples.size(); ++i) d.data()[i] = r.samples[i] * depth_scale;
    return d;
}

void save_depth_png16(const std::string& path, const Image& depth, double depth_scale) {
    if (depth.channels() != 1) throw std::invalid_argument("save_depth_png16: expected one channel");
    RawRaster r{depth.width(), depth.height(), 1, 16, {}};
    for (double v : depth.data())
        r.samples.push_back(static_cast<std::uint16_t>(std::clamp<long>(std::lround(v / depth_scale), 0, 65535)));
    write_png(path, r);
}

RgbdInput load_scene(const SceneEntry& entry, std::vector<std::string>* warnings) {
    RgbdInput s;
    s.image = load_color_png(entry.image_path);
    s.depth = load_depth(entry.depth_path, entry.depth_scale);
    if (!s.image.same_grid(s.depth)) {
        throw std::runtime_error("image " + entry.image_path + " (" + s.image.shape_string() + ") and depth " +
                                 entry.depth_path + " (" + s.depth.shape_string() + ") differ in size");
    }
    std::vector<double> positive;
    std::size_t bad = 0;
    for (double d : s.depth.data()) {
        if (d > 0.0 && std::isfinite(d)) positive.push_back(d);
        else ++bad;
    }
    if (positive.empty()) throw std::runtime_error(entry.depth_path + ": no positive depth values");
    if (bad > 0) {
        std::sort(positive.begin(), positive.end());
        const double fill = positive[static_cast<std::size_t>(0.01 * (positive.size() - 1))];
        for (double& d : s.depth.data())
            if (!(d > 0.0 && std::isfinite(d))) d = fill;
        if (warnings) {
            std::ostringstream msg;
            msg << entry.depth_path << ": replaced " << bad << " non-positive depth values with " << fill;
            warnings->push_back(msg.str());
        }
    }
    s.camera.fx = entry.fx;
    s.camera.fy = entry.fy;
    s.camera.cx = entry.cx;
    s.camera.cy = entry.cy;
    s.camera.width = s.image.width();
    s.camera.height = s.image.height();
    s.validate();
    return s;
}

std::vector<RgbdInput> load_corpus(const SceneManifest& manifest, std::vector<std::string>* warnings) {
    std::vector<RgbdInput> corpus;
    for (const SceneEntry& e : manifest.entries) corpus.push_back(load_scene(e, warnings));
    return corpus;
}

} // namespace monosplat
