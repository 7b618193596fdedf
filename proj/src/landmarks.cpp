#include "templar/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "templar/atomic_file.hpp"
#include "templar/container.hpp"
#include "templar/error.hpp"
#include "templar/parallel.hpp"

namespace templar {

namespace {

std::vector<double> unit_intensity(const Image& patch) {
    const Image gray = to_gray(patch);
    std::vector<double> v(gray.values());
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<double> raw(const Image& patch) { return patch.values(); }

const PatchFeatureFn& model_feature(const CascadeModel& model) {
    static const PatchFeatureFn unit = unit_intensity;
    static const PatchFeatureFn identity = raw;
    switch (model.feature) {
        case PatchFeatureKind::UnitIntensity: return unit;
        case PatchFeatureKind::Raw: return identity;
        case PatchFeatureKind::Custom:
            if (!model.custom_feature) raise(ErrorCode::InvalidArgument, "custom feature kind without a function");
            return model.custom_feature;
    }
    raise(ErrorCode::InvalidArgument, "unknown patch feature kind");
}

Eigen::VectorXd features_with_bias(const Image& image, const Shape& shape, int radius,
                                   const PatchFeatureFn& fn) {
    const auto f = extract_patch_features(image, shape, radius, fn);
    Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()) + 1);
    for (std::size_t i = 0; i < f.size(); ++i) v[static_cast<Eigen::Index>(i)] = f[i];
    v[v.size() - 1] = 1.0;
    return v;
}

void apply_increment(Shape& shape, const Eigen::VectorXd& delta) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
        shape[i].x += delta[static_cast<Eigen::Index>(2 * i)];
        shape[i].y += delta[static_cast<Eigen::Index>(2 * i + 1)];
    }
}

/// argmin_B ‖Y − X·B‖² + λ‖B‖², via the primal or dual normal equations
/// depending on which Gram matrix is smaller.
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
    if (x.rows() >= x.cols()) {
        Eigen::MatrixXd gram = x.transpose() * x;
        gram.diagonal().array() += lambda;
        return gram.ldlt().solve(x.transpose() * y);
    }
    Eigen::MatrixXd gram = x * x.transpose();
    gram.diagonal().array() += lambda;
    return x.transpose() * gram.ldlt().solve(y);
}

}  // namespace

PatchFeatureFn patch_feature_fn(PatchFeatureKind kind) {
    switch (kind) {
        case PatchFeatureKind::UnitIntensity: return unit_intensity;
        case PatchFeatureKind::Raw: return raw;
        case PatchFeatureKind::Custom: break;
    }
    raise(ErrorCode::InvalidArgument, "no built-in function for this patch feature kind");
}

std::vector<double> extract_patch_features(const Image& image, const Shape& shape, int patch_radius,
                                           const PatchFeatureFn& feature_fn) {
    const int side = 2 * patch_radius + 1;
    std::vector<double> out;
    std::size_t per_patch = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const int cx = std::clamp(static_cast<int>(std::lround(shape[i].x)), 0, std::max(0, image.width() - 1));
        const int cy = std::clamp(static_cast<int>(std::lround(shape[i].y)), 0, std::max(0, image.height() - 1));
        Image patch(side, side, image.channels(), 0.0);
        for (int dy = 0; dy < side; ++dy) {
            const int y = cy - patch_radius + dy;
            if (y < 0 || y >= image.height()) continue;
            for (int dx = 0; dx < side; ++dx) {
                const int x = cx - patch_radius + dx;
                if (x < 0 || x >= image.width()) continue;
                for (int c = 0; c < image.channels(); ++c) patch.at(dy, dx, c) = image.at(y, x, c);
            }
        }
        const auto f = feature_fn(patch);
        if (i == 0) {
            per_patch = f.size();
            out.reserve(per_patch * shape.size());
        } else if (f.size() != per_patch) {
            raise(ErrorCode::DimMismatch, "patch feature length varies between points");
        }
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

double shape_rms(std::span<const Shape> predicted, std::span<const Shape> truth) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < predicted.size(); ++s) {
        for (std::size_t i = 0; i < predicted[s].size(); ++i) {
            const double dx = predicted[s][i].x - truth[s][i].x;
            const double dy = predicted[s][i].y - truth[s][i].y;
            sum += dx * dx + dy * dy;
            ++count;
        }
    }
    return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

CascadeTrainResult cascade_train(std::span<const LandmarkSample> samples, const CascadeTrainOptions& options) {
    if (samples.empty()) raise(ErrorCode::InsufficientData, "cascade training needs at least one sample");
    const std::size_t num_points = samples.front().truth.size();
    if (num_points < 3) raise(ErrorCode::InvalidArgument, "shapes need at least 3 points");
    for (const auto& s : samples) {
        if (s.truth.size() != num_points) raise(ErrorCode::DimMismatch, "training shapes differ in point count");
    }
    if (options.stages < 0 || options.patch_radius < 0 || options.ridge_lambda < 0.0) {
        raise(ErrorCode::InvalidArgument, "negative cascade option");
    }

    CascadeModel model;
    model.patch_radius = options.patch_radius;
    model.feature = options.feature;
    model.custom_feature = options.custom_feature;
    if (options.initial_shape) {
        if (options.initial_shape->size() != num_points) {
            raise(ErrorCode::DimMismatch, "initial shape has the wrong point count");
        }
        model.mean_shape = *options.initial_shape;
    } else {
        model.mean_shape.assign(num_points, Point2{});
        for (const auto& s : samples) {
            for (std::size_t i = 0; i < num_points; ++i) {
                model.mean_shape[i].x += s.truth[i].x;
                model.mean_shape[i].y += s.truth[i].y;
            }
        }
        const double n = static_cast<double>(samples.size());
        for (auto& p : model.mean_shape) p = {p.x / n, p.y / n};
    }
    const PatchFeatureFn& fn = model_feature(model);

    std::vector<Shape> current(samples.size(), model.mean_shape);
    std::vector<Shape> truth;
    truth.reserve(samples.size());
    for (const auto& s : samples) truth.push_back(s.truth);

    CascadeTrainResult result;
    result.stage_rms.push_back(shape_rms(current, truth));
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto out_dim = static_cast<Eigen::Index>(2 * num_points);
    for (int t = 0; t < options.stages; ++t) {
        std::vector<Eigen::VectorXd> rows(samples.size());
        parallel_for(samples.size(), [&](std::size_t i) {
            rows[i] = features_with_bias(samples[i].image, current[i], model.patch_radius, fn);
        });
        const Eigen::Index feat_dim = rows.front().size();
        if (feat_dim <= 1) raise(ErrorCode::InsufficientData, "feature matrix is empty");
        Eigen::MatrixXd x(n, feat_dim);
        Eigen::MatrixXd y(n, out_dim);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (rows[static_cast<std::size_t>(i)].size() != feat_dim) {
                raise(ErrorCode::DimMismatch, "feature length differs between samples");
            }
            x.row(i) = rows[static_cast<std::size_t>(i)].transpose();
            for (std::size_t p = 0; p < num_points; ++p) {
                y(i, static_cast<Eigen::Index>(2 * p)) = truth[i][p].x - current[i][p].x;
                y(i, static_cast<Eigen::Index>(2 * p + 1)) = truth[i][p].y - current[i][p].y;
            }
        }
        Eigen::MatrixXd stage = ridge_solve(x, y, options.ridge_lambda).transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            apply_increment(current[static_cast<std::size_t>(i)], stage * x.row(i).transpose());
        }
        model.stages.push_back(std::move(stage));
        result.stage_rms.push_back(shape_rms(current, truth));
    }
    result.model = std::move(model);
    return result;
}

Shape cascade_predict(const CascadeModel& model, const Image& image) {
    Shape shape = model.mean_shape;
    if (model.stages.empty()) return shape;
    const PatchFeatureFn& fn = model_feature(model);
    for (const auto& stage : model.stages) {
        const Eigen::VectorXd f = features_with_bias(image, shape, model.patch_radius, fn);
        if (f.size() != stage.cols()) {
            raise(ErrorCode::DimMismatch, "stage expects " + std::to_string(stage.cols()) +
                                              " features, image yields " + std::to_string(f.size()));
        }
        apply_increment(shape, stage * f);
    }
    return shape;
}

void save_cascade(const std::filesystem::path& path, const CascadeModel& model) {
    if (model.feature == PatchFeatureKind::Custom) {
        raise(ErrorCode::InvalidArgument, "cascades with custom patch features cannot be serialized");
    }
    std::vector<std::uint8_t> bytes;
    MatrixRecord mean{ContainerRole::Cascade, model.mean_shape.size(), 2, {}};
    for (const auto& p : model.mean_shape) {
        mean.values.push_back(p.x);
        mean.values.push_back(p.y);
    }
    append_record(bytes, mean);
    append_record(bytes, {ContainerRole::Cascade, 1, 3,
                          {static_cast<double>(model.patch_radius), static_cast<double>(model.stages.size()),
                           static_cast<double>(static_cast<int>(model.feature))}});
    for (const auto& stage : model.stages) append_record(bytes, to_record(ContainerRole::Cascade, stage));
    write_file_atomic(path, bytes);
}

CascadeModel load_cascade(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    RecordReader reader(bytes);
    const MatrixRecord mean = reader.next(ContainerRole::Cascade);
    if (mean.cols != 2 || mean.rows < 3) raise(ErrorCode::FormatError, "cascade mean shape must be Lx2 with L>=3");
    const MatrixRecord meta = reader.next(ContainerRole::Cascade);
    if (meta.rows != 1 || meta.cols != 3) raise(ErrorCode::FormatError, "cascade metadata must be 1x3");
    const double radius = meta.values[0], stages = meta.values[1], kind = meta.values[2];
    if (radius < 0 || radius != std::floor(radius) || stages < 0 || stages != std::floor(stages) ||
        stages > 1e6 || !(kind == 0.0 || kind == 1.0)) {
        raise(ErrorCode::FormatError, "invalid cascade metadata");
    }
    CascadeModel model;
    model.patch_radius = static_cast<int>(radius);
    model.feature = static_cast<PatchFeatureKind>(static_cast<int>(kind));
    for (std::size_t i = 0; i < mean.rows; ++i) model.mean_shape.push_back({mean.values[2 * i], mean.values[2 * i + 1]});
    for (int t = 0; t < static_cast<int>(stages); ++t) {
        const MatrixRecord stage = reader.next(ContainerRole::Cascade);
        if (stage.rows != 2 * mean.rows || (t > 0 && stage.cols != static_cast<std::uint64_t>(model.stages[0].cols()))) {
            raise(ErrorCode::FormatError, "stage " + std::to_string(t) + " has inconsistent dims");
        }
        model.stages.push_back(to_matrix(stage));
    }
    reader.expect_end();
    return model;
}

}  // namespace templar
