#pragma once

#include "monosplat/core.hpp"
#include "monosplat/image.hpp"
#include "monosplat/lift.hpp"
#include "monosplat/raster.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace monosplat {

class Predictor;
struct PredictorKey;

struct BinaryMask {
    int height = 0;
    int width = 0;
    int grid_view = 0;
    std::vector<std::uint8_t> values;

    BinaryMask() = default;
    BinaryMask(int h, int w, int view, bool fill = false)
        : height(h), width(w), grid_view(view), values(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

    bool at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col] != 0; }
    void set(int row, int col, bool v) { values[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0; }
    std::size_t popcount() const;
    bool operator==(const BinaryMask&) const = default;
};

/// True where alpha < tau (a hole).
BinaryMask binarize_alpha(const Image& alpha, double tau, int grid_view = 0);

struct ComplementaryMasks {
    BinaryMask donor_1to0;  // view-1 grid: GS0 is a hole, GS1 is solid
    BinaryMask donor_0to1;  // view-0 grid: GS1 is a hole, GS0 is solid
};

/// a_ij is the alpha map rendered from GS_i in view_j.
ComplementaryMasks complementary_masks(const Image& a00, const Image& a01, const Image& a10, const Image& a11,
                                       double tau);

/// Keeps primitives whose provenance pixel is set in the mask, in order.
GaussianSet select_primitives(const GaussianSet& set, const BinaryMask& mask);

GaussianSet concat(const GaussianSet& a, const GaussianSet& b);

struct AggregationOutcome {
    GaussianSet merged_set;
    std::size_t donor_count = 0;
    BinaryMask mask_1to0;
    BinaryMask mask_0to1;
};

struct AggregatedPair {
    AggregationOutcome view0;  // Concat(GS0, GS1[M_1to0])
    AggregationOutcome view1;  // Concat(GS1, GS0[M_0to1])
    RenderTargets gs0_in_view1;  // reused by callers that already need it
};

AggregatedPair aggregate_pair(const GaussianSet& gs0, const GaussianSet& gs1, const Camera& cam0,
                              const Camera& cam1, double tau, const Vec3& background);

/// Same as aggregate_pair when the render of gs0 in view 1 is already known.
AggregatedPair aggregate_pair(const GaussianSet& gs0, const GaussianSet& gs1, const Camera& cam0,
                              const Camera& cam1, double tau, const Vec3& background,
                              const RenderTargets& gs0_in_view1);

struct InferenceResult {
    GaussianSet gs0;
    GaussianSet gs1;
    RgbdInput novel_input;
    AggregatedPair pair;
    GaussianSet merged() const { return pair.view0.merged_set; }
};

/// Two-view inference: GS0 from the input, a render at the novel camera,
/// GS1 from that render, and Concat(GS0, GS1[M_1to0]).
InferenceResult inference_aggregate_full(const RgbdInput& input, const Predictor& predictor, const PredictorKey& key,
                                         const Camera& novel_cam, double tau, const Vec3& background);

GaussianSet inference_aggregate(const RgbdInput& input, const Predictor& predictor, const PredictorKey& key,
                                const Camera& novel_cam, double tau, const Vec3& background);

/// Adds each gradient of `merged` to the slot of its source pixel in
/// `out` if its provenance view matches `view`.
void scatter_by_provenance(const GaussianSet& merged, const GradientBuffer& grads, int view, int width,
                           GradientBuffer& out);

} // namespace monosplat
