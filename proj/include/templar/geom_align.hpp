#pragma once

#include <array>
#include <span>
#include <string>

#include "templar/image.hpp"

namespace templar {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

/// p ↦ scale·R(rotation)·p + translation, with scale > 0.
struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0;  // radians
    double tx = 0.0;
    double ty = 0.0;

    static SimilarityTransform identity() { return {}; }

    SimilarityTransform inverse() const;
};

Point2 apply_transform(const SimilarityTransform& t, Point2 p);

/// outer ∘ inner: applies `inner` first.
SimilarityTransform compose(const SimilarityTransform& outer, const SimilarityTransform& inner);

/// Closed-form least-squares similarity (centroids plus scaled orthogonal
/// Procrustes) mapping src onto dst. Needs at least two correspondences and
/// src points that are not all coincident; throws DegenerateConfiguration
/// otherwise, or when the optimal scale collapses to zero.
SimilarityTransform estimate_similarity(std::span<const Point2> src, std::span<const Point2> dst);

/// Sum of squared distances between t(src_i) and dst_i.
double similarity_residual(const SimilarityTransform& t, std::span<const Point2> src,
                           std::span<const Point2> dst);

inline constexpr int kAlignedSize = 100;
inline constexpr int kAlignedChannels = 3;

/// Eye centers and nose base in the 100×100 canonical frame.
inline constexpr std::array<Point2, 3> kDefaultCanonical = {
    Point2{30.0, 35.0}, Point2{70.0, 35.0}, Point2{50.0, 62.0}};

struct AlignedFace {
    Image pixels;  // 100×100×3, values in [0,1]
    std::string source_id;
};

/// Resamples `image` into the canonical frame: each output pixel q reads the
/// source at T⁻¹(q) bilinearly, where T maps `landmarks` onto `canonical`.
/// Samples outside the source are 0. Single-channel input is replicated.
AlignedFace align_face(const Image& image, std::span<const Point2, 3> landmarks,
                       std::span<const Point2, 3> canonical = kDefaultCanonical,
                       std::string source_id = {});

}  // namespace templar
