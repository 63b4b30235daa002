#include "monosplat/fixtures.hpp"
#include "monosplat/io.hpp"
#include "monosplat/metrics.hpp"
#include "monosplat/predictor.hpp"
#include "monosplat/train.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace monosplat;
using monosplat::testing::random_image;

namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("monosplat_io_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image gray(int h, int w, double v) {
    Image img(h, w, 1);
    for (double& x : img.data()) x = v;
    return img;
}

SceneEntry entry_for(const std::string& image, const std::string& depth, const Camera& cam, double scale) {
    SceneEntry e;
    e.image_path = image;
    e.depth_path = depth;
    e.fx = cam.fx;
    e.fy = cam.fy;
    e.cx = cam.cx;
    e.cy = cam.cy;
    e.depth_scale = scale;
    return e;
}

} // namespace

// ------------------------------------------------------------- scene files

TEST(LoadDepth, SixteenBitValueIsScaled) {
    TempDir dir;
    RawRaster r{3, 2, 1, 16, std::vector<std::uint16_t>(6, 1000)};
    write_png(dir.file("d.png"), r);
    const Image d = load_depth(dir.file("d.png"), 0.001);
    for (double v : d.data()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(LoadDepth, PfmValuesAreScaled) {
    TempDir dir;
    Image d = gray(4, 5, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] = 0.5 + 0.25 * static_cast<double>(i);
    write_pfm(dir.file("d.pfm"), d);
    const Image back = load_depth(dir.file("d.pfm"), 2.0);
    ASSERT_TRUE(back.same_grid(d));
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_DOUBLE_EQ(back.data()[i], 2.0 * d.data()[i]);
}

TEST(LoadDepth, RejectsNonPositiveScale) {
    TempDir dir;
    write_pfm(dir.file("d.pfm"), gray(2, 2, 1.0));
    EXPECT_THROW(load_depth(dir.file("d.pfm"), 0.0), std::invalid_argument);
}

TEST(LoadScene, SizeMismatchNamesBothFiles) {
    TempDir dir;
    const RgbdInput s = smooth_scene(16);
    save_color_png(dir.file("img.png"), s.image);
    write_pfm(dir.file("depth.pfm"), gray(8, 16, 2.0));
    try {
        load_scene(entry_for(dir.file("img.png"), dir.file("depth.pfm"), s.camera, 1.0));
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("img.png"), std::string::npos) << msg;
        EXPECT_NE(msg.find("depth.pfm"), std::string::npos) << msg;
    }
}

TEST(LoadScene, SixteenBitRoundTripIsBitExact) {
    TempDir dir;
    const RgbdInput s = smooth_scene(24, 3);
    const double scale = 0.001;
    save_color_png(dir.file("img.png"), s.image, 16);
    save_depth_png16(dir.file("depth.png"), s.depth, scale);
    const SceneEntry e = entry_for(dir.file("img.png"), dir.file("depth.png"), s.camera, scale);
    const RgbdInput a = load_scene(e);

    save_color_png(dir.file("img2.png"), a.image, 16);
    save_depth_png16(dir.file("depth2.png"), a.depth, scale);
    EXPECT_EQ(read_bytes(dir.file("img.png")), read_bytes(dir.file("img2.png")));
    EXPECT_EQ(read_bytes(dir.file("depth.png")), read_bytes(dir.file("depth2.png")));

    const RgbdInput b = load_scene(entry_for(dir.file("img2.png"), dir.file("depth2.png"), s.camera, scale));
    EXPECT_TRUE(a.image == b.image);
    EXPECT_TRUE(a.depth == b.depth);
    EXPECT_LE(monosplat::testing::max_abs_diff(a.image, s.image), 0.5 / 65535.0 + 1e-12);
    EXPECT_EQ(a.camera.width, 24);
    EXPECT_DOUBLE_EQ(a.camera.fx, s.camera.fx);
}

TEST(LoadScene, NonPositiveDepthIsClampedWithWarning) {
    TempDir dir;
    const RgbdInput s = smooth_scene(10);
    Image depth = gray(10, 10, 0.0);
    for (std::size_t i = 0; i < depth.size(); ++i) depth.data()[i] = 1.0 + 0.01 * static_cast<double>(i);
    depth.data()[0] = 0.0;
    depth.data()[7] = -3.0;
    save_color_png(dir.file("img.png"), s.image);
    write_pfm(dir.file("depth.pfm"), depth);
    std::vector<std::string> warnings;
    const RgbdInput loaded = load_scene(entry_for(dir.file("img.png"), dir.file("depth.pfm"), s.camera, 1.0), &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("2"), std::string::npos);
    // The 1st percentile of the 98 positives is the smallest one.
    EXPECT_NEAR(loaded.depth.data()[0], 1.01, 1e-6);
    EXPECT_NEAR(loaded.depth.data()[7], 1.01, 1e-6);
    for (double d : loaded.depth.data()) EXPECT_GT(d, 0.0);
}

TEST(Manifest, RoundTripResolvesRelativePaths) {
    TempDir dir;
    const RgbdInput s = smooth_scene(12);
    save_color_png(dir.file("a.png"), s.image);
    save_depth_png16(dir.file("a_d.png"), s.depth, 0.001);
    {
        std::ofstream out(dir.file("m.json"));
        out << R"({"scenes": [{"image": "a.png", "depth": "a_d.png", "fx": 12, "fy": 12, "cx": 6, "cy": 6,
                  "depth_scale": 0.001}]})";
    }
    const SceneManifest m = load_manifest(dir.file("m.json"));
    ASSERT_EQ(m.entries.size(), 1u);
    EXPECT_EQ(fs::path(m.entries[0].image_path), fs::path(dir.file("a.png")));
    const std::vector<RgbdInput> corpus = load_corpus(m);
    ASSERT_EQ(corpus.size(), 1u);
    EXPECT_EQ(corpus[0].height(), 12);

    save_manifest(dir.file("m2.json"), m);
    const SceneManifest again = load_manifest(dir.file("m2.json"));
    ASSERT_EQ(again.entries.size(), 1u);
    EXPECT_EQ(fs::path(again.entries[0].depth_path), fs::path(m.entries[0].depth_path));
    EXPECT_DOUBLE_EQ(again.entries[0].depth_scale, 0.001);
}

TEST(Manifest, RejectsNonPositiveScale) {
    TempDir dir;
    {
        std::ofstream out(dir.file("m.json"));
        out << R"({"scenes": [{"image": "a.png", "depth": "b.png", "fx": 1, "fy": 1, "cx": 0, "cy": 0,
                  "depth_scale": -1}]})";
    }
    EXPECT_THROW(load_manifest(dir.file("m.json")), std::runtime_error);
}

TEST(Png, RejectsGarbage) {
    TempDir dir;
    std::ofstream(dir.file("x.png")) << "not a png";
    EXPECT_THROW(read_png(dir.file("x.png")), std::runtime_error);
}

// ----------------------------------------------------------------- metrics

TEST(Psnr, IdenticalIsCapped) {
    std::mt19937_64 rng(1);
    const Image a = random_image(8, 8, 3, rng);
    EXPECT_DOUBLE_EQ(psnr(a, a), 99.0);
}

TEST(Psnr, ZeroVersusOneIsZeroDb) {
    EXPECT_NEAR(psnr(gray(4, 4, 0.0), gray(4, 4, 1.0)), 0.0, 1e-12);
}

TEST(Psnr, MatchesNaiveLoop) {
    std::mt19937_64 rng(2);
    const Image a = random_image(9, 7, 3, rng), b = random_image(9, 7, 3, rng);
    double sum = 0.0;
    int n = 0;
    for (int v = 0; v < 9; ++v)
        for (int u = 0; u < 7; ++u)
            for (int c = 0; c < 3; ++c, ++n) sum += std::pow(a.at(v, u, c) - b.at(v, u, c), 2);
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(n / sum), 1e-6);
}

TEST(Psnr, ShapeMismatchThrows) {
    EXPECT_THROW(psnr(gray(2, 2, 0.0), gray(2, 3, 0.0)), std::invalid_argument);
}

TEST(Nfs, ConstantDepthIsZero) {
    EXPECT_DOUBLE_EQ(nfs_surrogate(gray(6, 6, 3.0)), 0.0);
}

TEST(Nfs, UniformRampIsLogOfBins) {
    Image d(1, 2000, 1);
    for (int u = 0; u < 2000; ++u) d.at(0, u, 0) = 1.0 + u / 1999.0;
    EXPECT_NEAR(nfs_surrogate(d), std::log(20.0), 0.01 * std::log(20.0));
}

TEST(Nfs, HalfStepIsLogTwo) {
    Image d = gray(4, 4, 1.0);
    for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 4; ++v) d.at(v, u, 0) = 5.0;
    EXPECT_NEAR(nfs_surrogate(d), std::log(2.0), 1e-12);
}

TEST(Nfs, NonNegativeOnRandomDepth) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const Image d = random_image(5, 5, 1, rng, 0.1, 10.0);
        const double s = nfs_surrogate(d);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, std::log(20.0) + 1e-12);
    }
}

TEST(HoleCoverage, Examples) {
    EXPECT_DOUBLE_EQ(hole_coverage(gray(4, 4, 1.0), 0.5), 0.0);
    EXPECT_DOUBLE_EQ(hole_coverage(gray(4, 4, 0.0), 0.5), 1.0);
    Image half = gray(4, 4, 0.0);
    for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 2; ++v) half.at(v, u, 0) = 0.9;
    EXPECT_DOUBLE_EQ(hole_coverage(half, 0.5), 0.5);
}

TEST(HoleCoverage, ThresholdIsStrict) {
    EXPECT_DOUBLE_EQ(hole_coverage(gray(2, 2, 0.5), 0.5), 0.0);
}

TEST(MetricsRecord, JsonHasBuckets) {
    MetricsRecord r;
    r.step = 4;
    r.psnr_canonical = 31.5;
    r.hole_coverage[10] = 0.25;
    r.photometric[10] = 0.125;
    const std::string s = r.to_json();
    EXPECT_NE(s.find("\"step\":4"), std::string::npos) << s;
    EXPECT_NE(s.find("\"10\":0.25"), std::string::npos) << s;
    EXPECT_EQ(s.find('\n'), std::string::npos);
}

TEST(Evaluate, IdentitySceneScoresHigh) {
    // The scene image is replaced by the canonical render of the predictor's
    // Gaussians; the color residuals are shifted so the predicted set does not move.
    RgbdInput scene = smooth_scene(32, 5);
    DirectFit fit(1, 32, 32);
    const GaussianSet gs = lift_pixel_aligned(scene, fit.predict(scene, {0, 0}), default_clamp_offset(scene.depth));
    const Image rendered = rasterize(gs, scene.camera, Vec3::Zero()).color;
    for (int v = 0; v < 32; ++v)
        for (int u = 0; u < 32; ++u)
            for (int c = 0; c < 3; ++c)
                fit.parameters()[fit.index({0, 0}, v, u, 3 + c)] = scene.image.at(v, u, c) - rendered.at(v, u, c);
    scene.image = rendered;

    TrainConfig cfg;
    cfg.aggregation = false;
    const MetricsRecord rec = evaluate_corpus(fit, {scene}, cfg, {0});
    EXPECT_GE(rec.psnr_canonical, 35.0);
    EXPECT_LT(rec.hole_coverage.at(0), 0.01);
    EXPECT_GE(rec.nfs_surrogate, 0.0);
}

// ------------------------------------------------------ config, checkpoint

TEST(Config, JsonRoundTrip) {
    TrainConfig cfg;
    cfg.predictor = "directfit";
    cfg.steps = 17;
    cfg.base_lr = 0.0025;
    cfg.aggregation = false;
    cfg.seed = 99;
    cfg.background = Vec3(0.1, 0.2, 0.3);
    const std::string text = config_to_json(cfg);
    const TrainConfig back = config_from_json(text);
    EXPECT_EQ(config_to_json(back), text);
    EXPECT_EQ(back.steps, 17);
    EXPECT_EQ(back.predictor, "directfit");
    EXPECT_FALSE(back.aggregation);
}

TEST(Config, PartialJsonKeepsDefaults) {
    const TrainConfig cfg = config_from_json(R"({"steps": 3})");
    EXPECT_EQ(cfg.steps, 3);
    EXPECT_EQ(cfg.predictor, TrainConfig{}.predictor);
}

TEST(Config, UnknownKeyIsError) {
    EXPECT_THROW(config_from_json(R"({"stepz": 3})"), std::invalid_argument);
}

TEST(Checkpoint, RoundTrip) {
    TempDir dir;
    TrainConfig cfg;
    cfg.predictor = "tinyconv";
    cfg.hidden = 4;
    cfg.seed = 7;
    const std::vector<RgbdInput> corpus = {smooth_scene(8)};
    auto p = make_initial_predictor(cfg, corpus);
    save_checkpoint(dir.file("k.bin"), *p, cfg);
    const Checkpoint k = load_checkpoint(dir.file("k.bin"));
    EXPECT_EQ(k.predictor->id(), p->id());
    ASSERT_EQ(k.predictor->parameters().size(), p->parameters().size());
    for (std::size_t i = 0; i < p->parameters().size(); ++i)
        EXPECT_EQ(k.predictor->parameters()[i], static_cast<double>(static_cast<float>(p->parameters()[i])));
    EXPECT_EQ(config_to_json(k.config), config_to_json(cfg));
}

TEST(Checkpoint, BadMagicIsRejected) {
    TempDir dir;
    std::ofstream(dir.file("k.bin"), std::ios::binary) << "NOTACKPT and some more bytes";
    EXPECT_THROW(load_checkpoint(dir.file("k.bin")), std::runtime_error);
}
