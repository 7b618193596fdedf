#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "templar/error.hpp"
#include "templar/pyramid_detect.hpp"
#include "templar/rng.hpp"

using namespace templar;

namespace {

Image random_image(Rng& rng, int h, int w, int c) {
    Image img(h, w, c);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

LinearScorer random_scorer(Rng& rng, int k, int d) {
    LinearScorer s{k, d, std::vector<double>(static_cast<std::size_t>(k * k * d)), rng.normal()};
    for (double& v : s.weights) v = rng.normal();
    return s;
}

std::vector<DetBox> random_boxes(Rng& rng, int n) {
    std::vector<DetBox> boxes;
    for (int i = 0; i < n; ++i) {
        // Coarse grids make coordinate and score ties common.
        boxes.push_back({double(rng.below(20)) * 5, double(rng.below(20)) * 5, 10.0 + double(rng.below(4)) * 10,
                         10.0 + double(rng.below(4)) * 10, double(rng.below(10)) / 10.0, int(rng.below(7))});
    }
    return boxes;
}

}  // namespace

TEST(Pyramid, HalfOctaveDimsFor256) {
    const Image img(256, 256, 1, 0.5);
    const auto p = build_pyramid(img, identity_features);
    ASSERT_EQ(p.levels.size(), 7u);
    const int expect[] = {256, 181, 128, 91, 64, 45, 32};
    for (int l = 0; l < 7; ++l) {
        EXPECT_EQ(p.levels[l].height(), expect[l]);
        EXPECT_EQ(p.levels[l].width(), expect[l]);
        EXPECT_EQ(static_cast<int>(std::lround(256 * std::pow(1 / std::sqrt(2.0), l))), expect[l]);
        EXPECT_NEAR(p.scale_factors[l], std::pow(2.0, -l / 2.0), 1e-15);
    }
}

TEST(Pyramid, ConstantImageGivesZeroLevels) {
    const Image img(64, 80, 3, 0.7);
    for (const auto& level : build_pyramid(img, identity_features).levels)
        for (double v : level.values()) EXPECT_EQ(v, 0.0);
}

TEST(Pyramid, LevelsAreZScoredAndNormalizationIsIdempotent) {
    Rng rng(1);
    const Image img = random_image(rng, 90, 70, 3);
    for (const FeatureFn& fn : {FeatureFn(identity_features), FeatureFn(gradient_histogram_features)}) {
        const auto p = build_pyramid(img, fn);
        ASSERT_EQ(p.levels.size(), 7u);
        for (std::size_t l = 0; l < p.levels.size(); ++l) {
            const Image& lv = p.levels[l];
            if (l > 0) {
                EXPECT_LT(lv.height(), p.levels[l - 1].height());
                EXPECT_LT(lv.width(), p.levels[l - 1].width());
            }
            const int n = lv.height() * lv.width();
            for (int c = 0; c < lv.channels(); ++c) {
                double mean = 0, sq = 0;
                for (int y = 0; y < lv.height(); ++y)
                    for (int x = 0; x < lv.width(); ++x) mean += lv.at(y, x, c);
                mean /= n;
                for (int y = 0; y < lv.height(); ++y)
                    for (int x = 0; x < lv.width(); ++x) sq += (lv.at(y, x, c) - mean) * (lv.at(y, x, c) - mean);
                const double var = sq / n;
                EXPECT_NEAR(mean, 0.0, 1e-6);
                if (var > 0) EXPECT_NEAR(var, 1.0, 1e-3);
            }
            Image again = lv;
            normalize_level(again);
            for (std::size_t i = 0; i < lv.size(); ++i) EXPECT_NEAR(again.values()[i], lv.values()[i], 1e-9);
        }
    }
}

TEST(Pyramid, SevenLevelsForAnyValidInput) {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const int h = 32 + static_cast<int>(rng.below(200)), w = 32 + static_cast<int>(rng.below(200));
        const auto p = build_pyramid(Image(h, w, 1, 0.1), identity_features);
        EXPECT_EQ(p.levels.size(), 7u);
        for (int l = 0; l < 7; ++l) {
            const auto [lh, lw] = level_dims(h, w, l);
            EXPECT_EQ(p.levels[l].height(), lh);
            EXPECT_EQ(p.levels[l].width(), lw);
            EXPECT_EQ(lh, static_cast<int>(std::lround(h * std::pow(2.0, -l / 2.0))));
        }
    }
}

TEST(Pyramid, TooSmallRejected) {
    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of([] { build_pyramid(Image(31, 64, 1), identity_features); }), ErrorCode::ImageTooSmall);
    EXPECT_EQ(code_of([] { build_pyramid(Image(32, 32, 1), identity_features, 5); }), ErrorCode::ImageTooSmall);
    EXPECT_NO_THROW(build_pyramid(Image(32, 32, 1), identity_features, 4));
}

TEST(ScoreLocations, ZeroWeightsGiveBias) {
    Rng rng(3);
    const auto p = build_pyramid(random_image(rng, 40, 40, 2), identity_features);
    const LinearScorer s{3, 2, std::vector<double>(18, 0.0), -1.25};
    const auto boxes = score_locations(p, s);
    EXPECT_FALSE(boxes.empty());
    for (const auto& b : boxes) EXPECT_EQ(b.score, -1.25);
}

TEST(ScoreLocations, SingleWindowCoversFootprint) {
    FeaturePyramid p;
    p.levels.push_back(Image(4, 4, 1, 1.0));
    p.scale_factors.push_back(1.0);
    const LinearScorer s{4, 1, std::vector<double>(16, 0.5), 0.0};
    const auto boxes = score_locations(p, s);
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_EQ(boxes[0].x, 0.0);
    EXPECT_EQ(boxes[0].y, 0.0);
    EXPECT_EQ(boxes[0].w, 4.0);
    EXPECT_EQ(boxes[0].h, 4.0);
    EXPECT_EQ(boxes[0].score, 8.0);
}

TEST(ScoreLocations, MatchesBruteForceOnToyPyramid) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        FeaturePyramid p;
        const int d = 1 + static_cast<int>(rng.below(3));
        for (int l = 0; l < 3; ++l) {
            p.levels.push_back(random_image(rng, 12 - 3 * l, 10 - 2 * l, d));
            p.scale_factors.push_back(std::pow(2.0, -l / 2.0));
        }
        const auto s = random_scorer(rng, 3, d);
        const auto boxes = score_locations(p, s);
        std::size_t i = 0;
        for (int l = 0; l < 3; ++l)
            for (int y = 0; y + 3 <= p.levels[l].height(); ++y)
                for (int x = 0; x + 3 <= p.levels[l].width(); ++x) {
                    ASSERT_LT(i, boxes.size());
                    const auto& b = boxes[i++];
                    EXPECT_EQ(b.level, l);
                    EXPECT_NEAR(b.score, oracle::window_score(p.levels[l], s, y, x), 1e-12);
                    EXPECT_NEAR(b.x, x / p.scale_factors[l], 1e-12);
                    EXPECT_NEAR(b.y, y / p.scale_factors[l], 1e-12);
                    EXPECT_NEAR(b.w, 3 / p.scale_factors[l], 1e-12);
                }
        EXPECT_EQ(i, boxes.size());
    }
}

TEST(ScoreLocations, LinearInWeights) {
    Rng rng(5);
    const auto p = build_pyramid(random_image(rng, 48, 40, 3), gradient_histogram_features, 4);
    auto s1 = random_scorer(rng, 4, 9), s2 = random_scorer(rng, 4, 9);
    LinearScorer sum = s1;
    for (std::size_t i = 0; i < sum.weights.size(); ++i) sum.weights[i] += s2.weights[i];
    sum.bias += s2.bias;
    const auto a = score_locations(p, s1), b = score_locations(p, s2), c = score_locations(p, sum);
    ASSERT_EQ(a.size(), c.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(c[i].score, a[i].score + b[i].score, 1e-9);
}

TEST(ScoreLocations, ChannelMismatchRejected) {
    const auto p = build_pyramid(Image(40, 40, 3, 0.2), identity_features);
    const LinearScorer s{2, 2, std::vector<double>(8, 1.0), 0.0};
    EXPECT_THROW(score_locations(p, s), Error);
}

TEST(Nms, SmallCases) {
    const DetBox a{0, 0, 10, 10, 0.9, 0};
    EXPECT_EQ(nms({a}, 0.5), std::vector<DetBox>{a});
    DetBox b = a;
    b.score = 0.5;
    EXPECT_EQ(nms({b, a}, 0.5), std::vector<DetBox>{a});
    EXPECT_TRUE(nms({}, 0.5).empty());
}

TEST(Nms, MatchesQuadraticOracleAndInvariants) {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const auto boxes = random_boxes(rng, 50);
        const double thr = rng.uniform(0.05, 0.95);
        const auto kept = nms(boxes, thr);
        EXPECT_EQ(kept, oracle::nms(boxes, thr));
        for (std::size_t i = 0; i < kept.size(); ++i) {
            EXPECT_NE(std::find(boxes.begin(), boxes.end(), kept[i]), boxes.end());
            for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(iou(kept[i], kept[j]), thr);
        }
        double top = -1e300;
        for (const auto& b : boxes) top = std::max(top, b.score);
        ASSERT_FALSE(kept.empty());
        EXPECT_EQ(kept.front().score, top);
    }
}

TEST(Scorer, RoundTrip) {
    Rng rng(7);
    const auto s = random_scorer(rng, 5, 9);
    const auto dir = oracle::temp_dir("scorer");
    save_scorer(dir / "s.tmpl", s);
    const auto back = load_scorer(dir / "s.tmpl");
    EXPECT_EQ(back.window, s.window);
    EXPECT_EQ(back.channels, s.channels);
    EXPECT_EQ(back.weights, s.weights);
    EXPECT_EQ(back.bias, s.bias);
}

TEST(Features, HistogramPreservesSizeAndIsNonNegative) {
    Rng rng(8);
    const Image img = random_image(rng, 33, 47, 3);
    const Image f = gradient_histogram_features(img);
    EXPECT_EQ(f.height(), 33);
    EXPECT_EQ(f.width(), 47);
    EXPECT_EQ(f.channels(), 9);
    for (double v : f.values()) EXPECT_GE(v, 0.0);
}
