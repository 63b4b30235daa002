#pragma once

#include "monosplat/image.hpp"

#include <cstdint>
#include <vector>

namespace monosplat {

/// Push-pull pyramid hole filling. `known` has one entry per pixel (nonzero
/// marks a valid pixel). Valid pixels are returned unchanged; holes receive
/// values interpolated from the coarser levels. The operator is linear in the
/// valid values for a fixed mask, so it also exposes its transpose.
class PushPull {
public:
    PushPull(int height, int width, const std::vector<std::uint8_t>& known);

    /// False when the mask has no valid pixel at all; fill() then yields zeros
    /// in every hole.
    bool has_support() const { return has_support_; }

    Image fill(const Image& values) const;

    /// Vector-Jacobian product: gradient w.r.t. `values` given the gradient
    /// w.r.t. the filled output.
    Image backward(const Image& grad_filled) const;

private:
    struct Level {
        int height = 0;
        int width = 0;
        std::vector<double> weight;  // in [0, 1]
        std::vector<double> norm;    // pull normalizer (sum of child weights)
    };

    int height_ = 0;
    int width_ = 0;
    bool has_support_ = false;
    std::vector<std::uint8_t> known_;
    std::vector<Level> levels_;
};

} // namespace monosplat
