#include "monosplat/predictor.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace monosplat {

// ---------------------------------------------------------------- DirectFit

DirectFit::DirectFit(int num_scenes, int height, int width)
    : num_scenes_(num_scenes), height_(height), width_(width) {
    if (num_scenes < 1 || height < 1 || width < 1) throw std::invalid_argument("DirectFit: invalid table dimensions");
    params_.assign(static_cast<std::size_t>(num_scenes) * 2 * height * width * AttributeMaps::kChannels, 0.0);
    zero_grad();
}

std::size_t DirectFit::index(const PredictorKey& key, int row, int col, int channel) const {
    return ((((static_cast<std::size_t>(key.scene) * 2 + key.slot) * height_ + row) * width_ + col) *
            AttributeMaps::kChannels) +
           channel;
}

void DirectFit::check(const RgbdInput& input, const PredictorKey& key) const {
    if (key.scene < 0 || key.scene >= num_scenes_ || key.slot < 0 || key.slot > 1) {
        throw std::invalid_argument("DirectFit: key (" + std::to_string(key.scene) + ", " + std::to_string(key.slot) +
                                    ") outside the table");
    }
    if (input.height() != height_ || input.width() != width_) {
        throw std::invalid_argument("DirectFit: input is " + std::to_string(input.height()) + "x" +
                                    std::to_string(input.width()) + ", table is " + std::to_string(height_) + "x" +
                                    std::to_string(width_));
    }
}

AttributeMaps DirectFit::predict(const RgbdInput& input, const PredictorKey& key) const {
    if (input.empty()) return AttributeMaps::zeros(0, 0);
    check(input, key);
    AttributeMaps maps = base_attribute_maps(input);
    for (int v = 0; v < height_; ++v)
        for (int u = 0; u < width_; ++u)
            for (int c = 0; c < AttributeMaps::kChannels; ++c)
                maps.set(v, u, c, maps.get(v, u, c) + params_[index(key, v, u, c)]);
    return maps;
}

void DirectFit::backward(const RgbdInput& input, const PredictorKey& key, const AttributeMaps& grad_maps,
                         InputGradient* input_grad) {
    check(input, key);
    for (int v = 0; v < height_; ++v)
        for (int u = 0; u < width_; ++u)
            for (int c = 0; c < AttributeMaps::kChannels; ++c) grads_[index(key, v, u, c)] += grad_maps.get(v, u, c);
    if (input_grad) input_grad->depth += base_attribute_maps_depth_grad(input, grad_maps);
}

std::vector<std::vector<std::int64_t>> DirectFit::tensor_shapes() const {
    return {{num_scenes_, 2, height_, width_, AttributeMaps::kChannels}};
}

// ---------------------------------------------------------------- TinyConv

namespace {

void conv3x3_forward(const double* in, int cin, int h, int w, const double* weight, const double* bias, int cout,
                     double* out) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int o = 0; o < cout; ++o) {
        double* dst = out + o * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] = bias[o];
        for (int i = 0; i < cin; ++i) {
            const double* src = in + i * plane;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = weight[((o * cin + i) * 3 + ky) * 3 + kx];
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                    for (int y = std::max(0, 1 - ky); y < std::min(h, h + 1 - ky); ++y) {
                        const double* row = src + (y + ky - 1) * w + (kx - 1);
                        double* drow = dst + y * w;
                        for (int x = x0; x < x1; ++x) drow[x] += wv * row[x];
                    }
                }
        }
    }
}

void conv3x3_backward(const double* in, int cin, int h, int w, const double* weight, int cout, const double* gout,
                      double* gweight, double* gbias, double* gin) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int o = 0; o < cout; ++o) {
        const double* g = gout + o * plane;
        double sum = 0.0;
        for (std::size_t p = 0; p < plane; ++p) sum += g[p];
        gbias[o] += sum;
        for (int i = 0; i < cin; ++i) {
            const double* src = in + i * plane;
            double* gsrc = gin ? gin + i * plane : nullptr;
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const std::size_t widx = ((o * cin + i) * 3 + ky) * 3 + kx;
                    const double wv = weight[widx];
                    const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                    double acc = 0.0;
                    for (int y = std::max(0, 1 - ky); y < std::min(h, h + 1 - ky); ++y) {
                        const int off = (y + ky - 1) * w + (kx - 1);
                        const double* grow = g + y * w;
                        for (int x = x0; x < x1; ++x) acc += grow[x] * src[off + x];
                        if (gsrc)
                            for (int x = x0; x < x1; ++x) gsrc[off + x] += wv * grow[x];
                    }
                    gweight[widx] += acc;
                }
        }
    }
}

} // namespace

TinyConv::TinyConv(int hidden, std::uint64_t seed) : hidden_(hidden) {
    if (hidden < 1) throw std::invalid_argument("TinyConv: hidden width must be positive");
    const int dims[4] = {kInputChannels, hidden, hidden, AttributeMaps::kChannels};
    std::size_t offset = 0;
    for (int l = 0; l < 3; ++l) {
        Layer layer{dims[l], dims[l + 1], offset, 0};
        offset += static_cast<std::size_t>(layer.out) * layer.in * 9;
        layer.bias_offset = offset;
        offset += layer.out;
        layers_.push_back(layer);
    }
    params_.assign(offset, 0.0);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < 3; ++l) {
        const Layer& layer = layers_[l];
        // He init for the hidden layers; the head starts near zero so the
        // initial prediction is the base map.
        const double stddev = l < 2 ? std::sqrt(2.0 / (layer.in * 9.0)) : 1e-3;
        std::normal_distribution<double> normal(0.0, stddev);
        for (std::size_t k = 0; k < static_cast<std::size_t>(layer.out) * layer.in * 9; ++k)
            params_[layer.weight_offset + k] = normal(rng);
    }
    zero_grad();
}

TinyConv::Activations TinyConv::forward(const RgbdInput& input) const {
    const int h = input.height(), w = input.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Activations act;
    std::vector<double> x(kInputChannels * plane);
    double mean_depth = 0.0;
    for (double d : input.depth.data()) mean_depth += d;
    mean_depth /= static_cast<double>(plane);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            const std::size_t p = static_cast<std::size_t>(v) * w + u;
            for (int c = 0; c < 3; ++c) x[c * plane + p] = input.image.at(v, u, c);
            x[3 * plane + p] = input.depth.at(v, u) / mean_depth - 1.0;
        }
    act.values.push_back(std::move(x));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        std::vector<double> y(static_cast<std::size_t>(layer.out) * plane);
        conv3x3_forward(act.values.back().data(), layer.in, h, w, &params_[layer.weight_offset],
                        &params_[layer.bias_offset], layer.out, y.data());
        if (l + 1 < layers_.size())
            for (double& t : y) t = t > 0.0 ? t : 0.0;
        act.values.push_back(std::move(y));
    }
    return act;
}

AttributeMaps TinyConv::predict(const RgbdInput& input, const PredictorKey&) const {
    if (input.empty()) return AttributeMaps::zeros(0, 0);
    input.validate();
    const int h = input.height(), w = input.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const Activations act = forward(input);
    const auto& head = act.values.back();
    AttributeMaps maps = base_attribute_maps(input);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            for (int c = 0; c < AttributeMaps::kChannels; ++c)
                maps.set(v, u, c, maps.get(v, u, c) + head[c * plane + static_cast<std::size_t>(v) * w + u]);
    return maps;
}

void TinyConv::backward(const RgbdInput& input, const PredictorKey&, const AttributeMaps& grad_maps,
                        InputGradient* input_grad) {
    const int h = input.height(), w = input.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const Activations act = forward(input);
    std::vector<double> g(AttributeMaps::kChannels * plane);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            for (int c = 0; c < AttributeMaps::kChannels; ++c)
                g[c * plane + static_cast<std::size_t>(v) * w + u] = grad_maps.get(v, u, c);

    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const bool need_input = l > 0 || input_grad != nullptr;
        std::vector<double> gin(need_input ? static_cast<std::size_t>(layer.in) * plane : 0, 0.0);
        conv3x3_backward(act.values[l].data(), layer.in, h, w, &params_[layer.weight_offset], layer.out, g.data(),
                         &grads_[layer.weight_offset], &grads_[layer.bias_offset], need_input ? gin.data() : nullptr);
        if (l > 0) {
            const auto& post = act.values[l];
            for (std::size_t k = 0; k < gin.size(); ++k)
                if (!(post[k] > 0.0)) gin[k] = 0.0;
        }
        g = std::move(gin);
    }

    if (input_grad) {
        double mean_depth = 0.0;
        for (double d : input.depth.data()) mean_depth += d;
        mean_depth /= static_cast<double>(plane);
        double weighted = 0.0;
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                const std::size_t p = static_cast<std::size_t>(v) * w + u;
                for (int c = 0; c < 3; ++c) input_grad->image.at(v, u, c) += g[c * plane + p];
                weighted += g[3 * plane + p] * input.depth.at(v, u);
            }
        const double correction = weighted / (mean_depth * mean_depth * static_cast<double>(plane));
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u)
                input_grad->depth.at(v, u) += g[3 * plane + static_cast<std::size_t>(v) * w + u] / mean_depth - correction;
        input_grad->depth += base_attribute_maps_depth_grad(input, grad_maps);
    }
}

std::vector<std::vector<std::int64_t>> TinyConv::tensor_shapes() const {
    std::vector<std::vector<std::int64_t>> shapes;
    for (const Layer& l : layers_) {
        shapes.push_back({l.out, l.in, 3, 3});
        shapes.push_back({l.out});
    }
    return shapes;
}

std::unique_ptr<Predictor> make_predictor(const std::string& id,
                                          const std::vector<std::vector<std::int64_t>>& shapes) {
    std::unique_ptr<Predictor> p;
    if (id == "directfit") {
        if (shapes.size() != 1 || shapes[0].size() != 5) throw std::invalid_argument("make_predictor: bad DirectFit shapes");
        p = std::make_unique<DirectFit>(static_cast<int>(shapes[0][0]), static_cast<int>(shapes[0][2]),
                                        static_cast<int>(shapes[0][3]));
    } else if (id == "tinyconv") {
        if (shapes.size() != 6 || shapes[0].size() != 4) throw std::invalid_argument("make_predictor: bad TinyConv shapes");
        p = std::make_unique<TinyConv>(static_cast<int>(shapes[0][0]));
    } else {
        throw std::invalid_argument("make_predictor: unknown predictor '" + id + "'");
    }
    if (p->tensor_shapes() != shapes) throw std::invalid_argument("make_predictor: tensor shapes do not match " + id);
    std::fill(p->parameters().begin(), p->parameters().end(), 0.0);
    return p;
}

} // namespace monosplat
