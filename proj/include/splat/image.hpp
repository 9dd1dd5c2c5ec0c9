#pragma once

#include "splat/errors.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace splat {

/// Dense row-major image of doubles with 1 or 3 channels.
///
/// Pixel (x, y) addresses column x of row y; channel index is innermost.
/// All rendering and loss math runs on this type; 8-bit quantization only
/// happens at the file boundary.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || (channels != 1 && channels != 3)) {
            throw ValidationError("Image: invalid dimensions " + std::to_string(width) + "x" +
                                  std::to_string(height) + "x" + std::to_string(channels));
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int y, int x, int c = 0) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image& a, const Image& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
               a.data_ == b.data_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<double> data_;
};

/// Throws ValidationError unless both images have identical shape.
inline void require_same_shape(const Image& a, const Image& b, const char* where) {
    if (!a.same_shape(b)) {
        throw ValidationError(std::string(where) + ": shape mismatch " +
                              std::to_string(a.width()) + "x" + std::to_string(a.height()) + "x" +
                              std::to_string(a.channels()) + " vs " + std::to_string(b.width()) +
                              "x" + std::to_string(b.height()) + "x" +
                              std::to_string(b.channels()));
    }
}

} // namespace splat
