#include "monosplat/pushpull.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace monosplat {

namespace {

struct Tap {
    int index;
    double weight;
};

// Bilinear taps into a (ph x pw) parent grid for child pixel (y, x).
std::array<Tap, 4> upsample_taps(int y, int x, int ph, int pw) {
    auto axis = [](double f, int n, int& i0, int& i1, double& t) {
        f = std::clamp(f, 0.0, static_cast<double>(n - 1));
        i0 = static_cast<int>(std::floor(f));
        i1 = std::min(i0 + 1, n - 1);
        t = f - i0;
    };
    int y0, y1, x0, x1;
    double ty, tx;
    axis(0.5 * y - 0.25, ph, y0, y1, ty);
    axis(0.5 * x - 0.25, pw, x0, x1, tx);
    return {Tap{y0 * pw + x0, (1 - ty) * (1 - tx)}, Tap{y0 * pw + x1, (1 - ty) * tx}, Tap{y1 * pw + x0, ty * (1 - tx)},
            Tap{y1 * pw + x1, ty * tx}};
}

} // namespace

PushPull::PushPull(int height, int width, const std::vector<std::uint8_t>& known)
    : height_(height), width_(width), known_(known) {
    if (known.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("PushPull: mask size does not match the grid");
    }
    Level base;
    base.height = height;
    base.width = width;
    base.weight.resize(known.size());
    for (std::size_t i = 0; i < known.size(); ++i) {
        base.weight[i] = known[i] ? 1.0 : 0.0;
        has_support_ = has_support_ || known[i];
    }
    levels_.push_back(std::move(base));
    while (levels_.back().height > 1 || levels_.back().width > 1) {
        const Level& fine = levels_.back();
        Level coarse;
        coarse.height = (fine.height + 1) / 2;
        coarse.width = (fine.width + 1) / 2;
        coarse.weight.assign(static_cast<std::size_t>(coarse.height) * coarse.width, 0.0);
        coarse.norm.assign(coarse.weight.size(), 0.0);
        for (int y = 0; y < fine.height; ++y)
            for (int x = 0; x < fine.width; ++x)
                coarse.norm[(y / 2) * coarse.width + x / 2] += fine.weight[y * fine.width + x];
        for (std::size_t i = 0; i < coarse.weight.size(); ++i) coarse.weight[i] = std::min(1.0, coarse.norm[i]);
        levels_.push_back(std::move(coarse));
    }
}

Image PushPull::fill(const Image& values) const {
    if (values.height() != height_ || values.width() != width_) {
        throw std::invalid_argument("PushPull::fill: image does not match the mask grid");
    }
    const int channels = values.channels();
    std::vector<std::vector<double>> pulled(levels_.size());
    pulled[0].assign(values.data().begin(), values.data().end());
    for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
        const Level& fine = levels_[l];
        const Level& coarse = levels_[l + 1];
        auto& out = pulled[l + 1];
        out.assign(coarse.weight.size() * channels, 0.0);
        for (int y = 0; y < fine.height; ++y)
            for (int x = 0; x < fine.width; ++x) {
                const double w = fine.weight[y * fine.width + x];
                if (w == 0.0) continue;
                const int p = (y / 2) * coarse.width + x / 2;
                for (int c = 0; c < channels; ++c)
                    out[p * channels + c] += w * pulled[l][(y * fine.width + x) * channels + c] / coarse.norm[p];
            }
    }
    // Push: blend each level with the upsampled coarser result.
    std::vector<double> pushed = pulled.back();
    for (std::size_t l = levels_.size() - 1; l-- > 0;) {
        const Level& fine = levels_[l];
        const Level& coarse = levels_[l + 1];
        std::vector<double> next(fine.weight.size() * channels, 0.0);
        for (int y = 0; y < fine.height; ++y)
            for (int x = 0; x < fine.width; ++x) {
                const int i = y * fine.width + x;
                const double w = fine.weight[i];
                const auto taps = upsample_taps(y, x, coarse.height, coarse.width);
                for (int c = 0; c < channels; ++c) {
                    double up = 0.0;
                    for (const auto& t : taps) up += t.weight * pushed[t.index * channels + c];
                    next[i * channels + c] = w * pulled[l][i * channels + c] + (1.0 - w) * up;
                }
            }
        pushed = std::move(next);
    }
    Image out = values;
    auto dst = out.data();
    for (std::size_t i = 0; i < known_.size(); ++i) {
        if (known_[i]) continue;
        for (int c = 0; c < channels; ++c) dst[i * channels + c] = pushed[i * channels + c];
    }
    return out;
}

Image PushPull::backward(const Image& grad_filled) const {
    if (grad_filled.height() != height_ || grad_filled.width() != width_) {
        throw std::invalid_argument("PushPull::backward: gradient does not match the mask grid");
    }
    const int channels = grad_filled.channels();
    const auto src = grad_filled.data();
    // Known pixels pass through; hole pixels see the pushed value.
    std::vector<std::vector<double>> g_pulled(levels_.size());
    for (std::size_t l = 0; l < levels_.size(); ++l) g_pulled[l].assign(levels_[l].weight.size() * channels, 0.0);
    std::vector<double> g_pushed(known_.size() * channels, 0.0);
    for (std::size_t i = 0; i < known_.size(); ++i)
        for (int c = 0; c < channels; ++c) {
            if (known_[i]) g_pulled[0][i * channels + c] += src[i * channels + c];
            else g_pushed[i * channels + c] = src[i * channels + c];
        }
    for (std::size_t l = 0; l + 1 < levels_.size(); ++l) {
        const Level& fine = levels_[l];
        const Level& coarse = levels_[l + 1];
        std::vector<double> g_coarse(coarse.weight.size() * channels, 0.0);
        for (int y = 0; y < fine.height; ++y)
            for (int x = 0; x < fine.width; ++x) {
                const int i = y * fine.width + x;
                const double w = fine.weight[i];
                const auto taps = upsample_taps(y, x, coarse.height, coarse.width);
                for (int c = 0; c < channels; ++c) {
                    const double g = g_pushed[i * channels + c];
                    g_pulled[l][i * channels + c] += w * g;
                    for (const auto& t : taps) g_coarse[t.index * channels + c] += (1.0 - w) * t.weight * g;
                }
            }
        g_pushed = std::move(g_coarse);
    }
    for (std::size_t i = 0; i < g_pushed.size(); ++i) g_pulled.back()[i] += g_pushed[i];
    for (std::size_t l = levels_.size() - 1; l-- > 0;) {
        const Level& fine = levels_[l];
        const Level& coarse = levels_[l + 1];
        for (int y = 0; y < fine.height; ++y)
            for (int x = 0; x < fine.width; ++x) {
                const double w = fine.weight[y * fine.width + x];
                if (w == 0.0) continue;
                const int p = (y / 2) * coarse.width + x / 2;
                for (int c = 0; c < channels; ++c)
                    g_pulled[l][(y * fine.width + x) * channels + c] +=
                        w / coarse.norm[p] * g_pulled[l + 1][p * channels + c];
            }
    }
    Image out(height_, width_, channels);
    auto dst = out.data();
    for (std::size_t i = 0; i < known_.size(); ++i)
        if (known_[i])
            for (int c = 0; c < channels; ++c) dst[i * channels + c] = g_pulled[0][i * channels + c];
    return out;
}

} // namespace monosplat
