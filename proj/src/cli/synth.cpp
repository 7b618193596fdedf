#include "cli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "templar/atomic_file.hpp"
#include "templar/error.hpp"
#include "templar/geom_align.hpp"
#include "templar/pnm.hpp"
#include "templar/protocol.hpp"
#include "templar/rng.hpp"

namespace templar::cli {

namespace {

struct Wave {
    double fx, fy, phase, amp[3];
};

struct Identity {
    double base[3];
    std::vector<Wave> waves;
};

Identity random_identity(Rng& rng) {
    Identity id{};
    for (double& b : id.base) b = rng.uniform(0.35, 0.7);
    for (int k = 0; k < 4; ++k) {
        Wave w{rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(0.0, 2.0 * M_PI), {}};
        for (double& a : w.amp) a = rng.uniform(-0.12, 0.12);
        id.waves.push_back(w);
    }
    return id;
}

Image render(const Identity& id, const SimilarityTransform& to_image, double gain, int size, Rng& rng) {
    const SimilarityTransform to_canonical = to_image.inverse();
    Image img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const Point2 q = apply_transform(to_canonical, {double(x), double(y)});
            const double ex = (q.x - 50.0) / 38.0, ey = (q.y - 52.0) / 48.0;
            const bool face = ex * ex + ey * ey <= 1.0;
            double dark = 0.0;
            for (const Point2& lm : kDefaultCanonical) {
                const double d2 = (q.x - lm.x) * (q.x - lm.x) + (q.y - lm.y) * (q.y - lm.y);
                dark += 0.45 * std::exp(-d2 / (2.0 * 9.0));
            }
            for (int c = 0; c < 3; ++c) {
                double v;
                if (face) {
                    v = id.base[c];
                    for (const Wave& w : id.waves) v += w.amp[c] * std::sin(w.fx * q.x + w.fy * q.y + w.phase);
                    v = v * gain - dark;
                } else {
                    v = 0.25 + 0.1 * std::sin(0.05 * x + 0.03 * y);
                }
                img.at(y, x, c) = std::clamp(v + 0.02 * rng.normal(), 0.0, 1.0);
            }
        }
    }
    return img;
}

std::string protocol_csv(const std::vector<ProtocolRow>& rows) {
    return serialize_protocol(ProtocolTable{{}, rows});
}

}  // namespace

void write_synthetic_dataset(const std::filesystem::path& dir, const SynthOptions& o) {
    if (o.subjects < 4 || o.templates_per_subject < 2 || o.media_per_template < 1 || o.splits < 1 ||
        o.fail_rate < 0.0 || o.fail_rate >= 1.0 || o.image_size < 100) {
        raise(ErrorCode::InvalidArgument, "synthetic dataset needs >=4 subjects, >=2 templates per subject, "
                                          ">=1 media, >=1 split, fail rate in [0,1) and images >= 100px");
    }
    Rng rng(o.seed);
    std::vector<ProtocolRow> all;
    std::vector<std::vector<std::vector<ProtocolRow>>> by_subject(o.subjects);
    const double centre = 0.5 * (o.image_size - 1);
    for (int s = 0; s < o.subjects; ++s) {
        const Identity id = random_identity(rng);
        const std::string subject = "s" + std::to_string(s);
        for (int t = 0; t < o.templates_per_subject; ++t) {
            const std::string tid = subject + "_t" + std::to_string(t);
            const bool failed = rng.uniform() < o.fail_rate;
            std::vector<ProtocolRow> rows;
            for (int m = 0; m < o.media_per_template; ++m) {
                const std::string media = tid + "_m" + std::to_string(m) + ".ppm";
                SimilarityTransform tf{rng.uniform(0.9, 1.1), rng.uniform(-0.15, 0.15), 0.0, 0.0};
                const Point2 c = apply_transform(tf, {50.0, 50.0});
                tf.tx = centre + rng.uniform(-6.0, 6.0) - c.x;
                tf.ty = centre + rng.uniform(-6.0, 6.0) - c.y;
                const double gain = rng.uniform(0.85, 1.15);
                Image img = render(id, tf, gain, o.image_size, rng);
                if (!failed) write_pnm(dir / "images" / media, img);
                std::array<Point2, 3> lm{};
                for (int k = 0; k < 3; ++k) lm[k] = apply_transform(tf, kDefaultCanonical[k]);
                rows.push_back({tid, subject, media, lm});
            }
            all.insert(all.end(), rows.begin(), rows.end());
            by_subject[s].push_back(std::move(rows));
        }
    }
    write_file_atomic(dir / "protocol.csv", protocol_csv(all));

    for (int split = 1; split <= o.splits; ++split) {
        Rng split_rng(o.seed * 31 + static_cast<std::uint64_t>(split));
        std::vector<int> order(o.subjects);
        for (int s = 0; s < o.subjects; ++s) order[s] = s;
        split_rng.shuffle(order);
        const int n_train = o.subjects / 2;
        std::vector<ProtocolRow> train, test;
        std::vector<std::string> test_templates;
        std::string ident = "template_id,role\n";
        for (int i = 0; i < o.subjects; ++i) {
            const auto& templates = by_subject[order[i]];
            for (std::size_t t = 0; t < templates.size(); ++t) {
                auto& bucket = i < n_train ? train : test;
                bucket.insert(bucket.end(), templates[t].begin(), templates[t].end());
                if (i >= n_train) {
                    test_templates.push_back(templates[t].front().template_id);
                    ident += templates[t].front().template_id + (t == 0 ? ",gallery\n" : ",probe\n");
                }
            }
        }
        std::string pairs = "template_a,template_b\n";
        for (std::size_t a = 0; a < test_templates.size(); ++a)
            for (std::size_t b = a + 1; b < test_templates.size(); ++b) pairs += test_templates[a] + "," + test_templates[b] + "\n";
        const auto sdir = dir / ("split" + std::to_string(split));
        write_file_atomic(sdir / "train.csv", protocol_csv(train));
        write_file_atomic(sdir / "templates.csv", protocol_csv(test));
        write_file_atomic(sdir / "pairs.csv", pairs);
        write_file_atomic(sdir / "ident.csv", ident);
    }
}

}  // namespace templar::cli
