#pragma once

#include "monosplat/image.hpp"
#include "monosplat/lift.hpp"

#include <map>
#include <string>
#include <vector>

namespace monosplat {

class Predictor;
struct TrainConfig;

/// 10 log10(1 / MSE), 99 when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

/// Shannon entropy (nats) of the min-max normalized depth histogram; 0 for constant depth.
double nfs_surrogate(const Image& depth, int bins = 20);

/// Fraction of pixels with alpha < tau.
double hole_coverage(const Image& alpha, double tau);

struct MetricsRecord {
    long step = 0;
    double psnr_canonical = 0.0;
    std::map<int, double> hole_coverage;  // yaw bucket (degrees, both signs) -> fraction
    std::map<int, double> photometric;    // yaw bucket -> photometric loss
    double nfs_surrogate = 0.0;

    std::string to_json() const;
};

struct NovelViewEvaluation {
    double hole_coverage = 0.0;
    double photometric = 0.0;
};

/// Renders the evaluated representation at `cam1`: the aggregated set when
/// cfg.aggregation is set, GS0 alone otherwise.
NovelViewEvaluation evaluate_novel_view(const Predictor& predictor, const RgbdInput& scene, int scene_index,
                                        const Camera& cam1, const TrainConfig& cfg);

/// Canonical PSNR and NFS surrogate plus hole coverage and photometric loss
/// averaged over yaw = +-bucket (pitch 0) and over the corpus.
MetricsRecord evaluate_corpus(const Predictor& predictor, const std::vector<RgbdInput>& corpus,
                              const TrainConfig& cfg, const std::vector<int>& yaw_buckets_deg = {10, 20, 30});

} // namespace monosplat
