#include "monosplat/metrics.hpp"

#include "monosplat/aggregate.hpp"
#include "monosplat/losses.hpp"
#include "monosplat/predictor.hpp"
#include "monosplat/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace monosplat {

double psnr(const Image& a, const Image& b) {
    a.require_same_shape(b, "psnr");
    if (a.empty()) throw std::invalid_argument("psnr: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse < 1e-10) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double nfs_surrogate(const Image& depth, int bins) {
    if (bins < 1) throw std::invalid_argument("nfs_surrogate: bins must be positive");
    if (depth.empty()) return 0.0;
    const auto [lo_it, hi_it] = std::minmax_element(depth.data().begin(), depth.data().end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return 0.0;
    std::vector<double> hist(bins, 0.0);
    for (double d : depth.data()) {
        const int b = std::min(bins - 1, static_cast<int>((d - lo) / (hi - lo) * bins));
        hist[b] += 1.0;
    }
    const double n = static_cast<double>(depth.size());
    double entropy = 0.0;
    for (double c : hist)
        if (c > 0.0) entropy -= (c / n) * std::log(c / n);
    return entropy;
}

double hole_coverage(const Image& alpha, double tau) {
    if (alpha.empty()) return 0.0;
    std::size_t holes = 0;
    for (double a : alpha.data())
        if (a < tau) ++holes;
    return static_cast<double>(holes) / static_cast<double>(alpha.size());
}

std::string MetricsRecord::to_json() const {
    nlohmann::json j;
    j["step"] = step;
    j["psnr_canonical"] = psnr_canonical;
    j["nfs_surrogate"] = nfs_surrogate;
    nlohmann::json holes = nlohmann::json::object(), photo = nlohmann::json::object();
    for (const auto& [yaw, v] : hole_coverage) holes[std::to_string(yaw)] = v;
    for (const auto& [yaw, v] : photometric) photo[std::to_string(yaw)] = v;
    j["hole_coverage"] = holes;
    j["photometric"] = photo;
    return j.dump();
}

NovelViewEvaluation evaluate_novel_view(const Predictor& predictor, const RgbdInput& scene, int scene_index,
                                        const Camera& cam1, const TrainConfig& cfg) {
    const PredictorKey key{scene_index, 0};
    GaussianSet set;
    if (cfg.aggregation) {
        set = inference_aggregate(scene, predictor, key, cam1, cfg.thresholds.tau, cfg.background);
    } else {
        set = lift_pixel_aligned(scene, predictor.predict(scene, key), default_clamp_offset(scene.depth), 0);
    }
    const RenderTargets r = rasterize(set, cam1, cfg.background);
    NovelViewEvaluation out;
    out.hole_coverage = hole_coverage(r.alpha, cfg.thresholds.tau);
    out.photometric = photometric_loss(scene.image, scene.depth, r.color, scene.camera, cam1).value;
    return out;
}

MetricsRecord evaluate_corpus(const Predictor& predictor, const std::vector<RgbdInput>& corpus,
                              const TrainConfig& cfg, const std::vector<int>& yaw_buckets_deg) {
    MetricsRecord rec;
    if (corpus.empty()) return rec;
    const double n = static_cast<double>(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const RgbdInput& scene = corpus[i];
        const int idx = static_cast<int>(i);
        const GaussianSet gs0 =
            lift_pixel_aligned(scene, predictor.predict(scene, {idx, 0}), default_clamp_offset(scene.depth), 0);
        const RenderTargets canonical = rasterize(gs0, scene.camera, cfg.background);
        rec.psnr_canonical += psnr(canonical.color, scene.image) / n;
        rec.nfs_surrogate += nfs_surrogate(canonical.depth) / n;
        const Vec3 pivot = orbit_pivot(scene.camera, scene.depth);
        for (int bucket : yaw_buckets_deg) {
            for (int sign : {-1, 1}) {
                const Camera cam = orbit_camera(scene.camera, pivot, sign * degrees_to_radians(bucket), 0.0);
                const NovelViewEvaluation e = evaluate_novel_view(predictor, scene, idx, cam, cfg);
                rec.hole_coverage[bucket] += e.hole_coverage / (2.0 * n);
                rec.photometric[bucket] += e.photometric / (2.0 * n);
            }
        }
    }
    return rec;
}

} // namespace monosplat
