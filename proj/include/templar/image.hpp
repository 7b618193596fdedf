#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace templar {

/// Dense H×W×C tensor of doubles stored row-major with interleaved channels.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    Image(int height, int width, int channels, std::vector<double> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Bilinear sample at a sub-pixel location. Pixel centers sit on integer
/// coordinates; returns false (and leaves out untouched) outside [0,W-1]×[0,H-1].
bool sample_bilinear(const Image& img, double x, double y, std::span<double> out);

/// Bilinear resize to the requested spatial size, aligning pixel centers.
Image resize_bilinear(const Image& img, int height, int width);

/// Mean over channels.
Image to_gray(const Image& img);

/// Replicates a single channel to three; three-channel input is returned as is.
Image to_rgb(const Image& img);

}  // namespace templar
