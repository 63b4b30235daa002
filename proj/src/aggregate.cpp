#include "monosplat/aggregate.hpp"

#include "monosplat/predictor.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace monosplat {

std::size_t BinaryMask::popcount() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask binarize_alpha(const Image& alpha, double tau, int grid_view) {
    BinaryMask mask(alpha.height(), alpha.width(), grid_view);
    const auto a = alpha.data();
    for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = a[i] < tau ? 1 : 0;
    return mask;
}

ComplementaryMasks complementary_masks(const Image& a00, const Image& a01, const Image& a10, const Image& a11,
                                       double tau) {
    if (!a00.same_grid(a10)) throw std::invalid_argument("complementary_masks: A00 and A10 grids differ");
    if (!a01.same_grid(a11)) throw std::invalid_argument("complementary_masks: A01 and A11 grids differ");
    const BinaryMask hole00 = binarize_alpha(a00, tau, 0);
    const BinaryMask hole01 = binarize_alpha(a01, tau, 1);
    const BinaryMask hole10 = binarize_alpha(a10, tau, 0);
    const BinaryMask hole11 = binarize_alpha(a11, tau, 1);
    ComplementaryMasks out{BinaryMask(a01.height(), a01.width(), 1), BinaryMask(a00.height(), a00.width(), 0)};
    for (std::size_t i = 0; i < out.donor_1to0.values.size(); ++i)
        out.donor_1to0.values[i] = (hole01.values[i] && !hole11.values[i]) ? 1 : 0;
    for (std::size_t i = 0; i < out.donor_0to1.values.size(); ++i)
        out.donor_0to1.values[i] = (hole10.values[i] && !hole00.values[i]) ? 1 : 0;
    return out;
}

GaussianSet select_primitives(const GaussianSet& set, const BinaryMask& mask) {
    set.validate(mask.height, mask.width);
    if (set.size() > mask.values.size()) throw std::invalid_argument("select_primitives: set is not pixel-aligned");
    GaussianSet out;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Provenance& p = set.provenance[i];
        if (p.view != mask.grid_view) {
            throw std::invalid_argument("select_primitives: primitive from view " + std::to_string(p.view) +
                                        " cannot be selected with a view-" + std::to_string(mask.grid_view) + " mask");
        }
        if (mask.at(p.row, p.col)) out.push_back(set.primitives[i], p);
    }
    return out;
}

GaussianSet concat(const GaussianSet& a, const GaussianSet& b) {
    GaussianSet out = a;
    out.primitives.insert(out.primitives.end(), b.primitives.begin(), b.primitives.end());
    out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
    return out;
}

AggregatedPair aggregate_pair(const GaussianSet& gs0, const GaussianSet& gs1, const Camera& cam0,
                              const Camera& cam1, double tau, const Vec3& background) {
    return aggregate_pair(gs0, gs1, cam0, cam1, tau, background, rasterize(gs0, cam1, background));
}

AggregatedPair aggregate_pair(const GaussianSet& gs0, const GaussianSet& gs1, const Camera& cam0,
                              const Camera& cam1, double tau, const Vec3& background,
                              const RenderTargets& gs0_in_view1) {
    const Image a00 = rasterize(gs0, cam0, background).alpha;
    const Image a10 = rasterize(gs1, cam0, background).alpha;
    const Image a11 = rasterize(gs1, cam1, background).alpha;
    const ComplementaryMasks masks = complementary_masks(a00, gs0_in_view1.alpha, a10, a11, tau);

    AggregatedPair out;
    const GaussianSet donors_to_0 = select_primitives(gs1, masks.donor_1to0);
    const GaussianSet donors_to_1 = select_primitives(gs0, masks.donor_0to1);
    out.view0 = {concat(gs0, donors_to_0), donors_to_0.size(), masks.donor_1to0, masks.donor_0to1};
    out.view1 = {concat(gs1, donors_to_1), donors_to_1.size(), masks.donor_1to0, masks.donor_0to1};
    out.gs0_in_view1 = gs0_in_view1;
    return out;
}

InferenceResult inference_aggregate_full(const RgbdInput& input, const Predictor& predictor, const PredictorKey& key,
                                         const Camera& novel_cam, double tau, const Vec3& background) {
    InferenceResult r;
    if (input.empty()) return r;
    const double clamp = default_clamp_offset(input.depth);
    r.gs0 = lift_pixel_aligned(input, predictor.predict(input, key.with_slot(0)), clamp, 0);
    const RenderTargets novel = rasterize(r.gs0, novel_cam, background);
    r.novel_input = rendered_view_input(novel, novel_cam, tau, median_of(input.depth.data()));
    r.gs1 = lift_pixel_aligned(r.novel_input, predictor.predict(r.novel_input, key.with_slot(1)), clamp, 1);
    r.pair = aggregate_pair(r.gs0, r.gs1, input.camera, novel_cam, tau, background, novel);
    return r;
}

GaussianSet inference_aggregate(const RgbdInput& input, const Predictor& predictor, const PredictorKey& key,
                                const Camera& novel_cam, double tau, const Vec3& background) {
    if (input.empty()) return {};
    return inference_aggregate_full(input, predictor, key, novel_cam, tau, background).merged();
}

void scatter_by_provenance(const GaussianSet& merged, const GradientBuffer& grads, int view, int width,
                           GradientBuffer& out) {
    if (grads.size() != merged.size()) throw std::invalid_argument("scatter_by_provenance: size mismatch");
    for (std::size_t i = 0; i < merged.size(); ++i) {
        const Provenance& p = merged.provenance[i];
        if (p.view != view) continue;
        out[static_cast<std::size_t>(p.row) * width + p.col] += grads[i];
    }
}

} // namespace monosplat
