#pragma once

#include "monosplat/lift.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace monosplat {

/// Identifies which input a prediction belongs to. slot 0 is the canonical
/// view of a scene, slot 1 a rendered novel view of it.
struct PredictorKey {
    int scene = 0;
    int slot = 0;

    PredictorKey with_slot(int s) const { return {scene, s}; }
};

struct InputGradient {
    Image image;
    Image depth;

    static InputGradient zeros(int height, int width) { return {Image(height, width, 3), Image(height, width, 1)}; }
};

/// Image-to-attribute-map model. Implementations predict a residual on top of
/// base_attribute_maps(), so a zero-initialized model reproduces the input.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual std::string id() const = 0;
    virtual AttributeMaps predict(const RgbdInput& input, const PredictorKey& key) const = 0;

    /// Accumulates dL/dparameters into gradients(). When input_grad is non-null,
    /// dL/dinput is added to it.
    virtual void backward(const RgbdInput& input, const PredictorKey& key, const AttributeMaps& grad_maps,
                          InputGradient* input_grad) = 0;

    /// Shapes of the parameter tensors, in storage order.
    virtual std::vector<std::vector<std::int64_t>> tensor_shapes() const = 0;
    virtual std::unique_ptr<Predictor> clone() const = 0;

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& gradients() { return grads_; }
    const std::vector<double>& gradients() const { return grads_; }
    void zero_grad() { grads_.assign(params_.size(), 0.0); }

protected:
    std::vector<double> params_;
    std::vector<double> grads_;
};

/// Free per-(scene, slot) attribute tables; ignores image content apart from
/// the base maps.
class DirectFit final : public Predictor {
public:
    DirectFit(int num_scenes, int height, int width);

    std::string id() const override { return "directfit"; }
    AttributeMaps predict(const RgbdInput& input, const PredictorKey& key) const override;
    void backward(const RgbdInput& input, const PredictorKey& key, const AttributeMaps& grad_maps,
                  InputGradient* input_grad) override;
    std::vector<std::vector<std::int64_t>> tensor_shapes() const override;
    std::unique_ptr<Predictor> clone() const override { return std::make_unique<DirectFit>(*this); }

    int num_scenes() const { return num_scenes_; }
    int height() const { return height_; }
    int width() const { return width_; }
    /// Offset of table entry (scene, slot, row, col, channel) in parameters().
    std::size_t index(const PredictorKey& key, int row, int col, int channel) const;

private:
    void check(const RgbdInput& input, const PredictorKey& key) const;

    int num_scenes_;
    int height_;
    int width_;
};

/// Shared three-layer 3x3 convolutional map predictor with a hand-written
/// backward pass. Input features: RGB and depth / mean(depth) - 1.
class TinyConv final : public Predictor {
public:
    static constexpr int kInputChannels = 4;

    explicit TinyConv(int hidden = 16, std::uint64_t seed = 0);

    std::string id() const override { return "tinyconv"; }
    AttributeMaps predict(const RgbdInput& input, const PredictorKey& key) const override;
    void backward(const RgbdInput& input, const PredictorKey& key, const AttributeMaps& grad_maps,
                  InputGradient* input_grad) override;
    std::vector<std::vector<std::int64_t>> tensor_shapes() const override;
    std::unique_ptr<Predictor> clone() const override { return std::make_unique<TinyConv>(*this); }

    int hidden() const { return hidden_; }

private:
    struct Layer {
        int in = 0;
        int out = 0;
        std::size_t weight_offset = 0;  // out x in x 3 x 3
        std::size_t bias_offset = 0;
    };
    struct Activations {
        std::vector<std::vector<double>> values;  // layer inputs (post-activation), then the output
    };

    Activations forward(const RgbdInput& input) const;

    int hidden_;
    std::vector<Layer> layers_;
};

/// Rebuilds a predictor from its identifier and tensor shapes (parameters zeroed).
std::unique_ptr<Predictor> make_predictor(const std::string& id,
                                          const std::vector<std::vector<std::int64_t>>& shapes);

} // namespace monosplat
