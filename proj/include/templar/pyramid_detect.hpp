#pragma once

#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "templar/image.hpp"

namespace templar {

/// Dense per-pixel feature extractor: H×W×C image → H×W×D feature map.
using FeatureFn = std::function<Image(const Image&)>;

Image identity_features(const Image& img);

/// Nine unsigned-orientation bins of gradient magnitude (central differences on
/// the gray image), each summed over a 5×5 neighbourhood.
Image gradient_histogram_features(const Image& img);

inline constexpr int kPyramidLevels = 7;
inline constexpr int kMinPyramidInput = 32;

/// Scale of level l relative to level 0: (1/√2)^l.
double level_scale(int level);

/// Spatial size of level l for an H×W input, rounded to nearest.
std::pair<int, int> level_dims(int height, int width, int level);

struct FeaturePyramid {
    std::vector<Image> levels;         // kPyramidLevels feature maps
    std::vector<double> scale_factors; // relative to level 0
};

/// Per-channel z-score; channels with (numerically) zero variance become 0.
void normalize_level(Image& level);

/// Seven half-octave levels, each resized bilinearly, passed through
/// feature_fn and normalized. Throws ImageTooSmall when the input is under
/// 32 px or the smallest level would be narrower than `window`.
FeaturePyramid build_pyramid(const Image& image, const FeatureFn& feature_fn, int window = 1);

/// Linear window classifier; weights are indexed ((dy·k + dx)·D + c).
struct LinearScorer {
    int window = 1;
    int channels = 1;
    std::vector<double> weights;
    double bias = 0.0;
};

struct DetBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    double score = 0.0;
    int level = 0;

    bool operator==(const DetBox&) const = default;
};

/// Scores every k×k window on every level, mapping boxes back to level-0
/// pixel coordinates by dividing by the level scale.
std::vector<DetBox> score_locations(const FeaturePyramid& pyramid, const LinearScorer& scorer);

double iou(const DetBox& a, const DetBox& b);

/// Greedy suppression in descending score order, ties broken by (x, y, level)
/// ascending. Boxes with IoU > iou_threshold against a kept box are dropped.
std::vector<DetBox> nms(std::vector<DetBox> boxes, double iou_threshold);

/// Scorer files hold two records: the k²×D weight grid and a 1×1 bias.
void save_scorer(const std::filesystem::path& path, const LinearScorer& scorer);
LinearScorer load_scorer(const std::filesystem::path& path);

}  // namespace templar
