#include "templar/image.hpp"

#include <algorithm>
#include <cmath>

#include "templar/error.hpp"

namespace templar {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 0) {
        raise(ErrorCode::InvalidArgument, "negative image dimension");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 0 || width < 0 || channels < 0 ||
        data_.size() != static_cast<std::size_t>(height) * width * channels) {
        raise(ErrorCode::ShapeMismatch, "image data does not match its dimensions");
    }
}

bool sample_bilinear(const Image& img, double x, double y, std::span<double> out) {
    const int w = img.width();
    const int h = img.height();
    // Coordinates within kEdgeSlack of the border snap onto it, so transforms
    // that are the identity up to rounding still reach the last row and column.
    constexpr double kEdgeSlack = 1e-9;
    if (!(x >= -kEdgeSlack && y >= -kEdgeSlack && x <= w - 1 + kEdgeSlack && y <= h - 1 + kEdgeSlack)) {
        return false;
    }
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = x0 + 1 < w ? x0 + 1 : x0;
    const int y1 = y0 + 1 < h ? y0 + 1 : y0;
    const double fx = x - x0;
    const double fy = y - y0;
    for (int c = 0; c < img.channels(); ++c) {
        const double top = (1.0 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
        const double bottom = (1.0 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
        out[c] = (1.0 - fy) * top + fy * bottom;
    }
    return true;
}

Image resize_bilinear(const Image& img, int height, int width) {
    if (height <= 0 || width <= 0) {
        raise(ErrorCode::InvalidArgument, "resize target must be positive");
    }
    Image out(height, width, img.channels());
    const double sy = height > 1 ? static_cast<double>(img.height() - 1) / (height - 1) : 0.0;
    const double sx = width > 1 ? static_cast<double>(img.width() - 1) / (width - 1) : 0.0;
    std::vector<double> px(img.channels());
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            sample_bilinear(img, x * sx, y * sy, px);
            for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = px[c];
        }
    }
    return out;
}

Image to_gray(const Image& img) {
    Image out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double sum = 0.0;
            for (int c = 0; c < img.channels(); ++c) sum += img.at(y, x, c);
            out.at(y, x, 0) = img.channels() > 0 ? sum / img.channels() : 0.0;
        }
    }
    return out;
}

Image to_rgb(const Image& img) {
    if (img.channels() == 3) return img;
    if (img.channels() != 1) {
        raise(ErrorCode::ShapeMismatch,
              "expected 1 or 3 channels, got " + std::to_string(img.channels()));
    }
    Image out(img.height(), img.width(), 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
    return out;
}

}  // namespace templar
