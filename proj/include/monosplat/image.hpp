#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace monosplat {

/// Dense row-major H x W x C raster of doubles. Used for color images,
/// depth maps, alpha maps and per-pixel gradients alike.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels) {
        if (height < 0 || width < 0 || channels < 0) {
            throw std::invalid_argument("Image: negative dimension");
        }
        data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
    double at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    bool same_grid(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    void fill(double value) { data_.assign(data_.size(), value); }

    /// Same shape and bit-identical samples.
    bool operator==(const Image& other) const = default;

    Image& operator+=(const Image& other) {
        require_same_shape(other, "Image::operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    void add_scaled(const Image& other, double scale) {
        require_same_shape(other, "Image::add_scaled");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
    }

    void require_same_shape(const Image& other, const char* what) const {
        if (!same_shape(other)) {
            throw std::invalid_argument(std::string(what) + ": shape mismatch (" + shape_string() +
                                        " vs " + other.shape_string() + ")");
        }
    }

    std::string shape_string() const {
        return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
    }

private:
    std::size_t index(int row, int col, int ch) const {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

} // namespace monosplat
