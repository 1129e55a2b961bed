#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "advtex/errors.hpp"

namespace advtex {

/// Dense row-major H x W x C grid of doubles. The workhorse container for
/// images, textures, and gradients.
class Grid3 {
public:
    Grid3() = default;
    Grid3(int height, int width, int channels, double fill = 0.0)
        : h_(height), w_(width), c_(channels),
          data_(checked_size(height, width, channels), fill) {}

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    int channels() const noexcept { return c_; }
    size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
    double at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    bool same_shape(const Grid3& other) const noexcept {
        return h_ == other.h_ && w_ == other.w_ && c_ == other.c_;
    }

    bool all_finite() const noexcept {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    size_t index(int row, int col, int ch) const noexcept {
        return (static_cast<size_t>(row) * w_ + col) * c_ + ch;
    }

    friend bool operator==(const Grid3& a, const Grid3& b) {
        return a.h_ == b.h_ && a.w_ == b.w_ && a.c_ == b.c_ && a.data_ == b.data_;
    }

private:
    static size_t checked_size(int height, int width, int channels) {
        if (height <= 0 || width <= 0 || channels <= 0)
            throw ValidationError("grid dimensions must be positive");
        return static_cast<size_t>(height) * width * channels;
    }

    int h_ = 0;
    int w_ = 0;
    int c_ = 0;
    std::vector<double> data_;
};

/// Boolean grid with the same indexing convention as Grid3.
class Mask3 {
public:
    Mask3() = default;
    Mask3(int height, int width, int channels, bool fill = false)
        : h_(height), w_(width), c_(channels),
          data_(static_cast<size_t>(height) * width * channels, fill ? 1 : 0) {}

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    int channels() const noexcept { return c_; }
    size_t size() const noexcept { return data_.size(); }

    void set(int row, int col, int ch, bool v) { data_[index(row, col, ch)] = v ? 1 : 0; }
    bool at(int row, int col, int ch) const { return data_[index(row, col, ch)] != 0; }

    bool get(size_t i) const { return data_[i] != 0; }
    void set(size_t i, bool v) { data_[i] = v ? 1 : 0; }

    size_t count() const noexcept {
        size_t n = 0;
        for (auto v : data_) n += (v != 0);
        return n;
    }

    size_t index(int row, int col, int ch) const noexcept {
        return (static_cast<size_t>(row) * w_ + col) * c_ + ch;
    }

    friend bool operator==(const Mask3& a, const Mask3& b) {
        return a.h_ == b.h_ && a.w_ == b.w_ && a.c_ == b.c_ && a.data_ == b.data_;
    }

private:
    int h_ = 0;
    int w_ = 0;
    int c_ = 0;
    std::vector<unsigned char> data_;
};

/// H x W x 3 image with every channel in [0,1].
struct ImageFrame {
    Grid3 pixels;

    ImageFrame() = default;
    explicit ImageFrame(Grid3 px) : pixels(std::move(px)) { validate(); }
    ImageFrame(int height, int width, double fill = 0.0) : pixels(height, width, 3, fill) {
        if (fill < 0.0 || fill > 1.0) throw ValidationError("image fill outside [0,1]");
    }

    int height() const noexcept { return pixels.height(); }
    int width() const noexcept { return pixels.width(); }

    void validate() const {
        if (pixels.channels() != 3) throw ValidationError("image must have 3 channels");
        for (size_t i = 0; i < pixels.size(); ++i) {
            double v = pixels[i];
            if (!(v >= 0.0 && v <= 1.0))
                throw ValidationError("image channel value outside [0,1]");
        }
    }

    friend bool operator==(const ImageFrame& a, const ImageFrame& b) {
        return a.pixels == b.pixels;
    }
};

}  // namespace advtex
