#include "templar/pyramid_detect.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "templar/atomic_file.hpp"
#include "templar/container.hpp"
#include "templar/error.hpp"
#include "templar/parallel.hpp"

namespace templar {

Image identity_features(const Image& img) { return img; }

Image gradient_histogram_features(const Image& img) {
    constexpr int kBins = 9;
    constexpr int kRadius = 2;
    const Image gray = to_gray(img);
    const int h = gray.height(), w = gray.width();
    // Magnitude per orientation bin, then a separable box sum. Summing
    // non-negative terms directly keeps empty bins exactly zero.
    Image mags(h, w, kBins);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = gray.at(y, std::min(x + 1, w - 1), 0) - gray.at(y, std::max(x - 1, 0), 0);
            const double gy = gray.at(std::min(y + 1, h - 1), x, 0) - gray.at(std::max(y - 1, 0), x, 0);
            double angle = std::atan2(gy, gx);
            if (angle < 0.0) angle += std::numbers::pi;
            const int bin = std::min(kBins - 1, static_cast<int>(angle / std::numbers::pi * kBins));
            mags.at(y, x, bin) = std::hypot(gx, gy);
        }
    }
    Image rows(h, w, kBins);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int dx = std::max(0, x - kRadius); dx <= std::min(w - 1, x + kRadius); ++dx)
                for (int b = 0; b < kBins; ++b) rows.at(y, x, b) += mags.at(y, dx, b);
    Image out(h, w, kBins);
    for (int y = 0; y < h; ++y)
        for (int dy = std::max(0, y - kRadius); dy <= std::min(h - 1, y + kRadius); ++dy)
            for (int x = 0; x < w; ++x)
                for (int b = 0; b < kBins; ++b) out.at(y, x, b) += rows.at(dy, x, b);
    return out;
}

double level_scale(int level) { return std::exp2(-0.5 * level); }

std::pair<int, int> level_dims(int height, int width, int level) {
    const double s = level_scale(level);
    return {static_cast<int>(std::lround(height * s)), static_cast<int>(std::lround(width * s))};
}

void normalize_level(Image& level) {
    const int channels = level.channels();
    const std::size_t pixels = static_cast<std::size_t>(level.height()) * level.width();
    if (pixels == 0) return;
    auto data = level.data();
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < pixels; ++i) mean += data[i * channels + c];
        mean /= static_cast<double>(pixels);
        double var = 0.0;
        for (std::size_t i = 0; i < pixels; ++i) {
            const double d = data[i * channels + c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(pixels);
        if (var <= 1e-20 * std::max(1.0, mean * mean)) {
            for (std::size_t i = 0; i < pixels; ++i) data[i * channels + c] = 0.0;
            continue;
        }
        const double inv_sd = 1.0 / std::sqrt(var);
        for (std::size_t i = 0; i < pixels; ++i) {
            data[i * channels + c] = (data[i * channels + c] - mean) * inv_sd;
        }
    }
}

FeaturePyramid build_pyramid(const Image& image, const FeatureFn& feature_fn, int window) {
    if (image.height() < kMinPyramidInput || image.width() < kMinPyramidInput) {
        raise(ErrorCode::ImageTooSmall, "pyramid input must be at least 32x32, got " +
                                            std::to_string(image.height()) + "x" +
                                            std::to_string(image.width()));
    }
    const auto [top_h, top_w] = level_dims(image.height(), image.width(), kPyramidLevels - 1);
    if (top_h < window || top_w < window) {
        raise(ErrorCode::ImageTooSmall, "level " + std::to_string(kPyramidLevels - 1) + " is " +
                                            std::to_string(top_h) + "x" + std::to_string(top_w) +
                                            ", smaller than the " + std::to_string(window) +
                                            "px scorer window");
    }
    FeaturePyramid p;
    p.levels.resize(kPyramidLevels);
    p.scale_factors.resize(kPyramidLevels);
    parallel_for(kPyramidLevels, [&](std::size_t l) {
        const auto [h, w] = level_dims(image.height(), image.width(), static_cast<int>(l));
        Image level = (h == image.height() && w == image.width()) ? image : resize_bilinear(image, h, w);
        Image features = feature_fn(level);
        if (features.height() != h || features.width() != w) {
            raise(ErrorCode::ShapeMismatch, "feature_fn changed the spatial size of level " +
                                                std::to_string(l));
        }
        normalize_level(features);
        p.levels[l] = std::move(features);
        p.scale_factors[l] = level_scale(static_cast<int>(l));
    });
    return p;
}

std::vector<DetBox> score_locations(const FeaturePyramid& pyramid, const LinearScorer& scorer) {
    const int k = scorer.window;
    const int d = scorer.channels;
    if (scorer.weights.size() != static_cast<std::size_t>(k) * k * d) {
        raise(ErrorCode::DimMismatch, "scorer has " + std::to_string(scorer.weights.size()) +
                                          " weights, expected " + std::to_string(k * k * d));
    }
    std::vector<DetBox> boxes;
    for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
        const Image& level = pyramid.levels[l];
        if (level.channels() != d) {
            raise(ErrorCode::DimMismatch, "level " + std::to_string(l) + " has " +
                                              std::to_string(level.channels()) + " channels, scorer expects " +
                                              std::to_string(d));
        }
        const double inv = 1.0 / pyramid.scale_factors[l];
        for (int y = 0; y + k <= level.height(); ++y) {
            for (int x = 0; x + k <= level.width(); ++x) {
                double s = scorer.bias;
                std::size_t wi = 0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx)
                        for (int c = 0; c < d; ++c) s += scorer.weights[wi++] * level.at(y + dy, x + dx, c);
                boxes.push_back({x * inv, y * inv, k * inv, k * inv, s, static_cast<int>(l)});
            }
        }
    }
    return boxes;
}

double iou(const DetBox& a, const DetBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<DetBox> nms(std::vector<DetBox> boxes, double iou_threshold) {
    std::stable_sort(boxes.begin(), boxes.end(), [](const DetBox& a, const DetBox& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.level < b.level;
    });
    std::vector<DetBox> kept;
    for (const DetBox& b : boxes) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                            [&](const DetBox& k) { return iou(k, b) > iou_threshold; });
        if (!suppressed) kept.push_back(b);
    }
    return kept;
}

void save_scorer(const std::filesystem::path& path, const LinearScorer& scorer) {
    const std::size_t rows = static_cast<std::size_t>(scorer.window) * scorer.window;
    if (scorer.weights.size() != rows * scorer.channels) {
        raise(ErrorCode::DimMismatch, "scorer weights do not match window and channels");
    }
    std::vector<std::uint8_t> bytes;
    append_record(bytes, {ContainerRole::Scorer, rows, static_cast<std::uint64_t>(scorer.channels),
                          scorer.weights});
    append_record(bytes, {ContainerRole::Scorer, 1, 1, {scorer.bias}});
    write_file_atomic(path, bytes);
}

LinearScorer load_scorer(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    RecordReader reader(bytes);
    MatrixRecord grid = reader.next(ContainerRole::Scorer);
    MatrixRecord bias = reader.next(ContainerRole::Scorer);
    reader.expect_end();
    const auto k = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(grid.rows))));
    if (k == 0 || k * k != grid.rows || grid.cols == 0) {
        raise(ErrorCode::FormatError, "scorer grid rows must be a positive square, found " +
                                          std::to_string(grid.rows));
    }
    if (bias.rows != 1 || bias.cols != 1) raise(ErrorCode::FormatError, "scorer bias must be 1x1");
    return {static_cast<int>(k), static_cast<int>(grid.cols), std::move(grid.values), bias.values[0]};
}

}  // namespace templar
