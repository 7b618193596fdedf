#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "templar/geom_align.hpp"
#include "templar/image.hpp"

namespace templar {

/// Ordered landmark set; indices 0, 1, 2 are the eye centers and nose base.
using Shape = std::vector<Point2>;

/// Maps one (2r+1)×(2r+1)×C patch to a fixed-length feature vector.
using PatchFeatureFn = std::function<std::vector<double>(const Image& patch)>;

enum class PatchFeatureKind : int {
    UnitIntensity = 0,  // gray patch, L2-normalized (zero stays zero)
    Raw = 1,            // all channels, untouched
    Custom = 2,         // caller-supplied; not serializable
};

PatchFeatureFn patch_feature_fn(PatchFeatureKind kind);

/// Concatenates feature_fn over the patch centred at each (rounded) point.
/// Centres are clamped into the image; pixels beyond the border read as 0.
std::vector<double> extract_patch_features(const Image& image, const Shape& shape, int patch_radius,
                                           const PatchFeatureFn& feature_fn);

struct CascadeModel {
    Shape mean_shape;
    /// Stage t maps [features; 1] to the 2L increment (x0, y0, x1, y1, ...).
    std::vector<Eigen::MatrixXd> stages;
    int patch_radius = 7;
    PatchFeatureKind feature = PatchFeatureKind::UnitIntensity;
    PatchFeatureFn custom_feature;  // used when feature == Custom
};

struct LandmarkSample {
    Image image;
    Shape truth;
};

struct CascadeTrainOptions {
    int stages = 5;
    int patch_radius = 7;
    double ridge_lambda = 1e-3;
    PatchFeatureKind feature = PatchFeatureKind::UnitIntensity;
    PatchFeatureFn custom_feature;
    /// Starting shape; defaults to the mean of the training shapes.
    std::optional<Shape> initial_shape;
};

struct CascadeTrainResult {
    CascadeModel model;
    /// RMS landmark error on the training set: entry 0 before any stage,
    /// entry t after stage t.
    std::vector<double> stage_rms;
};

/// Each stage is a closed-form ridge regression from features at the current
/// estimates to the remaining residual, so training RMS cannot increase.
/// Throws InsufficientData for an empty set and DimMismatch for unequal L.
CascadeTrainResult cascade_train(std::span<const LandmarkSample> samples, const CascadeTrainOptions& options);

Shape cascade_predict(const CascadeModel& model, const Image& image);

/// sqrt of the mean squared point-to-point distance.
double shape_rms(std::span<const Shape> predicted, std::span<const Shape> truth);

void save_cascade(const std::filesystem::path& path, const CascadeModel& model);
CascadeModel load_cascade(const std::filesystem::path& path);

}  // namespace templar
