#include "templar/geom_align.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "templar/error.hpp"

namespace templar {

SimilarityTransform SimilarityTransform::inverse() const {
    const double inv = 1.0 / scale;
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    // -(1/s)·R(-θ)·t
    return {inv, -rotation, -inv * (c * tx + s * ty), -inv * (-s * tx + c * ty)};
}

Point2 apply_transform(const SimilarityTransform& t, Point2 p) {
    const double c = std::cos(t.rotation);
    const double s = std::sin(t.rotation);
    return {t.scale * (c * p.x - s * p.y) + t.tx, t.scale * (s * p.x + c * p.y) + t.ty};
}

SimilarityTransform compose(const SimilarityTransform& outer, const SimilarityTransform& inner) {
    const Point2 t = apply_transform(outer, {inner.tx, inner.ty});
    return {outer.scale * inner.scale, std::remainder(outer.rotation + inner.rotation, 2.0 * M_PI),
            t.x, t.y};
}

SimilarityTransform estimate_similarity(std::span<const Point2> src, std::span<const Point2> dst) {
    if (src.size() != dst.size()) {
        raise(ErrorCode::InvalidArgument, "correspondence lists differ in length");
    }
    if (src.size() < 2) {
        raise(ErrorCode::DegenerateConfiguration, "need at least 2 correspondences");
    }
    const double n = static_cast<double>(src.size());
    Point2 cs{}, cd{};
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs.x += src[i].x;
        cs.y += src[i].y;
        cd.x += dst[i].x;
        cd.y += dst[i].y;
    }
    cs = {cs.x / n, cs.y / n};
    cd = {cd.x / n, cd.y / n};

    double spread = 0.0;  // Σ‖s̃‖²
    double dot = 0.0;     // Σ s̃·d̃
    double cross = 0.0;   // Σ s̃×d̃
    double magnitude = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double sx = src[i].x - cs.x, sy = src[i].y - cs.y;
        const double dx = dst[i].x - cd.x, dy = dst[i].y - cd.y;
        spread += sx * sx + sy * sy;
        dot += sx * dx + sy * dy;
        cross += sx * dy - sy * dx;
        magnitude += src[i].x * src[i].x + src[i].y * src[i].y;
    }
    if (!(spread > 1e-24 * std::max(1.0, magnitude))) {
        raise(ErrorCode::DegenerateConfiguration, "source points coincide; scale is undefined");
    }
    const double a = dot / spread;    // s·cosθ
    const double b = cross / spread;  // s·sinθ
    const double scale = std::hypot(a, b);
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        raise(ErrorCode::DegenerateConfiguration, "destination points coincide; scale collapses to 0");
    }
    SimilarityTransform t{scale, std::atan2(b, a), 0.0, 0.0};
    t.tx = cd.x - (a * cs.x - b * cs.y);
    t.ty = cd.y - (b * cs.x + a * cs.y);
    return t;
}

double similarity_residual(const SimilarityTransform& t, std::span<const Point2> src,
                           std::span<const Point2> dst) {
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Point2 q = apply_transform(t, src[i]);
        sum += (q.x - dst[i].x) * (q.x - dst[i].x) + (q.y - dst[i].y) * (q.y - dst[i].y);
    }
    return sum;
}

AlignedFace align_face(const Image& image, std::span<const Point2, 3> landmarks,
                       std::span<const Point2, 3> canonical, std::string source_id) {
    for (const Point2& p : landmarks) {
        if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= image.width() - 1 && p.y <= image.height() - 1)) {
            raise(ErrorCode::InvalidArgument, "landmark outside image bounds");
        }
    }
    const Image src = to_rgb(image);
    const SimilarityTransform back = estimate_similarity(landmarks, canonical).inverse();
    Image out(kAlignedSize, kAlignedSize, kAlignedChannels, 0.0);
    std::vector<double> px(kAlignedChannels);
    for (int y = 0; y < kAlignedSize; ++y) {
        for (int x = 0; x < kAlignedSize; ++x) {
            const Point2 s = apply_transform(back, {static_cast<double>(x), static_cast<double>(y)});
            if (sample_bilinear(src, s.x, s.y, px)) {
                for (int c = 0; c < kAlignedChannels; ++c) out.at(y, x, c) = std::clamp(px[c], 0.0, 1.0);
            }
        }
    }
    return {std::move(out), std::move(source_id)};
}

}  // namespace templar
