#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <variant>

#include <unistd.h>

namespace oracle {

double similarity_objective(double s, double theta, double tx, double ty, const std::vector<Point2>& src,
                            const std::vector<Point2>& dst) {
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double x = s * (std::cos(theta) * src[i].x - std::sin(theta) * src[i].y) + tx;
        const double y = s * (std::sin(theta) * src[i].x + std::cos(theta) * src[i].y) + ty;
        sum += (x - dst[i].x) * (x - dst[i].x) + (y - dst[i].y) * (y - dst[i].y);
    }
    return sum;
}

double box_iou(const DetBox& a, const DetBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<DetBox> nms(const std::vector<DetBox>& boxes, double iou_threshold) {
    std::vector<bool> alive(boxes.size(), true);
    std::vector<DetBox> kept;
    for (;;) {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (!alive[i]) continue;
            if (!best) {
                best = i;
                continue;
            }
            const DetBox& a = boxes[i];
            const DetBox& b = boxes[*best];
            const bool better = a.score > b.score ||
                                (a.score == b.score && std::tie(a.x, a.y, a.level) < std::tie(b.x, b.y, b.level));
            if (better) best = i;
        }
        if (!best) break;
        kept.push_back(boxes[*best]);
        alive[*best] = false;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (alive[i] && box_iou(boxes[*best], boxes[i]) > iou_threshold) alive[i] = false;
        }
    }
    return kept;
}

double window_score(const templar::Image& level, const templar::LinearScorer& s, int y, int x) {
    double sum = s.bias;
    for (int dy = 0; dy < s.window; ++dy)
        for (int dx = 0; dx < s.window; ++dx)
            for (int c = 0; c < s.channels; ++c)
                sum += s.weights[static_cast<std::size_t>((dy * s.window + dx) * s.channels + c)] *
                       level.at(y + dy, x + dx, c);
    return sum;
}

namespace {

struct Tensor {
    int h, w, c;
    std::vector<double> v;  // HWC
    double& at(int y, int x, int ch) { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    double get(int y, int x, int ch) const {
        if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
};

}  // namespace

std::vector<double> net_forward(const templar::NetSpec& spec, const templar::NetWeights& weights,
                                const templar::Image& input) {
    Tensor t{input.height(), input.width(), input.channels(), input.values()};
    std::size_t p = 0;
    for (const auto& layer : spec.layers) {
        if (const auto* conv = std::get_if<templar::ConvLayer>(&layer)) {
            const auto& lp = weights.params[p++];
            const int oh = (t.h + 2 * conv->pad - conv->kernel) / conv->stride + 1;
            const int ow = (t.w + 2 * conv->pad - conv->kernel) / conv->stride + 1;
            Tensor o{oh, ow, conv->out_channels, std::vector<double>(static_cast<std::size_t>(oh) * ow * conv->out_channels)};
            for (int oc = 0; oc < conv->out_channels; ++oc)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x) {
                        double sum = lp.bias(oc);
                        for (int ic = 0; ic < t.c; ++ic)
                            for (int ky = 0; ky < conv->kernel; ++ky)
                                for (int kx = 0; kx < conv->kernel; ++kx) {
                                    const int col = (ic * conv->kernel + ky) * conv->kernel + kx;
                                    sum += lp.weight(oc, col) * t.get(y * conv->stride + ky - conv->pad,
                                                                      x * conv->stride + kx - conv->pad, ic);
                                }
                        o.at(y, x, oc) = sum;
                    }
            t = std::move(o);
        } else if (const auto* pool = std::get_if<templar::MaxPoolLayer>(&layer)) {
            const int oh = (t.h - pool->kernel) / pool->stride + 1;
            const int ow = (t.w - pool->kernel) / pool->stride + 1;
            Tensor o{oh, ow, t.c, std::vector<double>(static_cast<std::size_t>(oh) * ow * t.c)};
            for (int ch = 0; ch < t.c; ++ch)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x) {
                        double m = -std::numeric_limits<double>::infinity();
                        for (int ky = 0; ky < pool->kernel; ++ky)
                            for (int kx = 0; kx < pool->kernel; ++kx)
                                m = std::max(m, t.get(y * pool->stride + ky, x * pool->stride + kx, ch));
                        o.at(y, x, ch) = m;
                    }
            t = std::move(o);
        } else if (std::holds_alternative<templar::ReluLayer>(layer)) {
            for (double& v : t.v) v = v > 0.0 ? v : 0.0;
        } else {
            const auto& fc = std::get<templar::FullyConnectedLayer>(layer);
            const auto& lp = weights.params[p++];
            Tensor o{1, 1, fc.out_dim, std::vector<double>(static_cast<std::size_t>(fc.out_dim))};
            for (int k = 0; k < fc.out_dim; ++k) {
                double sum = lp.bias(k);
                for (int ch = 0; ch < t.c; ++ch)
                    for (int y = 0; y < t.h; ++y)
                        for (int x = 0; x < t.w; ++x) sum += lp.weight(k, (ch * t.h + y) * t.w + x) * t.get(y, x, ch);
                o.v[static_cast<std::size_t>(k)] = sum;
            }
            t = std::move(o);
        }
    }
    std::vector<double> flat(t.v.size());
    for (int ch = 0; ch < t.c; ++ch)
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) flat[(static_cast<std::size_t>(ch) * t.h + y) * t.w + x] = t.get(y, x, ch);
    return flat;
}

double triplet_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const std::vector<templar::Triplet>& batch,
                    double margin) {
    double total = 0.0;
    for (const auto& t : batch) {
        double dp = 0.0, dn = 0.0;
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            double a = 0.0, p = 0.0, n = 0.0;
            for (Eigen::Index i = 0; i < w.rows(); ++i) {
                a += w(i, j) * x(i, static_cast<Eigen::Index>(t.anchor));
                p += w(i, j) * x(i, static_cast<Eigen::Index>(t.positive));
                n += w(i, j) * x(i, static_cast<Eigen::Index>(t.negative));
            }
            dp += (a - p) * (a - p);
            dn += (a - n) * (a - n);
        }
        total += std::max(0.0, margin + dp - dn);
    }
    return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

namespace {

std::vector<double> normalized(std::vector<double> v) {
    double n = 0.0;
    for (double e : v) n += e * e;
    n = std::sqrt(n);
    if (n > 0.0)
        for (double& e : v) e /= n;
    return v;
}

}  // namespace

std::optional<std::vector<double>> template_vector(const templar::Template& t, const Eigen::MatrixXd& w) {
    if (t.media.empty()) return std::nullopt;
    std::vector<double> acc(static_cast<std::size_t>(w.cols()), 0.0);
    for (const auto& d : t.media) {
        std::vector<double> e(acc.size(), 0.0);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) e[static_cast<std::size_t>(j)] += w(i, j) * d(i);
        e = normalized(e);
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += e[j];
    }
    for (double& v : acc) v /= static_cast<double>(t.media.size());
    return normalized(acc);
}

std::optional<double> pair_score(const templar::Template& a, const templar::Template& b, const Eigen::MatrixXd& w,
                                 templar::SetupPolicy policy) {
    const auto va = template_vector(a, w);
    const auto vb = template_vector(b, w);
    if (!va || !vb) {
        if (policy == templar::SetupPolicy::Setup1) return std::nullopt;
        return -1.0;
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < va->size(); ++i) dot += (*va)[i] * (*vb)[i];
    return std::clamp(dot, -1.0, 1.0);
}

Roc roc(const std::vector<double>& genuine, const std::vector<double>& impostor, const std::vector<double>& targets) {
    std::set<double> thresholds(genuine.begin(), genuine.end());
    thresholds.insert(impostor.begin(), impostor.end());
    thresholds.insert(std::numeric_limits<double>::infinity());
    Roc out;
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
        std::size_t ta = 0, fa = 0;
        for (double g : genuine) ta += g >= *it;
        for (double i : impostor) fa += i >= *it;
        out.points.push_back({static_cast<double>(fa) / static_cast<double>(impostor.size()),
                              static_cast<double>(ta) / static_cast<double>(genuine.size()), *it});
    }
    for (double target : targets) {
        double best = 0.0;
        for (const auto& p : out.points)
            if (p.far <= target) best = std::max(best, p.tar);
        out.tar_at.push_back(best);
    }
    return out;
}

std::vector<std::optional<std::size_t>> ident_ranks(const std::vector<templar::Template>& probes,
                                                    const std::vector<templar::Template>& gallery,
                                                    const Eigen::MatrixXd& w, templar::SetupPolicy policy) {
    std::vector<std::optional<std::size_t>> ranks;
    for (const auto& probe : probes) {
        if (probe.media.empty()) {
            if (policy == templar::SetupPolicy::Setup2) ranks.push_back(gallery.size());
            else ranks.push_back(std::nullopt);
            continue;
        }
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            const auto s = pair_score(probe, gallery[g], w, policy);
            if (s) order.emplace_back(*s, g);
        }
        std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return gallery[a.second].template_id < gallery[b.second].template_id;
        });
        std::optional<std::size_t> rank;
        for (std::size_t k = 0; k < order.size(); ++k) {
            if (gallery[order[k].second].subject_id == probe.subject_id) {
                rank = k + 1;
                break;
            }
        }
        ranks.push_back(rank);
    }
    return ranks;
}

std::vector<double> cmc(const std::vector<std::optional<std::size_t>>& ranks, std::size_t gallery_size) {
    std::vector<double> out;
    std::size_t counted = 0;
    for (const auto& r : ranks) counted += r.has_value();
    for (std::size_t k = 1; k <= gallery_size; ++k) {
        std::size_t hits = 0;
        for (const auto& r : ranks) hits += r && *r <= k;
        out.push_back(static_cast<double>(hits) / static_cast<double>(counted));
    }
    return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

EvalInstance random_instance(templar::Rng& rng, int max_templates, int max_subjects, double fail_share, int dim,
                             int embed_dim) {
    EvalInstance inst;
    const int subjects = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_subjects - 1)));
    const int n_templates = std::max(2 * subjects, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_templates))));
    std::vector<Eigen::VectorXd> centres;
    for (int s = 0; s < subjects; ++s) {
        Eigen::VectorXd c(dim);
        for (int i = 0; i < dim; ++i) c(i) = rng.normal();
        centres.push_back(c);
    }
    for (int t = 0; t < n_templates; ++t) {
        const int s = t < 2 * subjects ? t % subjects : static_cast<int>(rng.below(static_cast<std::uint64_t>(subjects)));
        templar::Template tpl{"t" + std::to_string(1000 + t), "s" + std::to_string(s), {}};
        const bool fail = rng.uniform() < fail_share;
        const int media = 1 + static_cast<int>(rng.below(3));
        for (int m = 0; m < media && !fail; ++m) {
            Eigen::VectorXd d = centres[static_cast<std::size_t>(s)];
            for (int i = 0; i < dim; ++i) d(i) += 0.8 * rng.normal();
            tpl.media.push_back(d);
        }
        inst.templates.push_back(std::move(tpl));
    }
    for (std::size_t a = 0; a < inst.templates.size(); ++a)
        for (std::size_t b = a + 1; b < inst.templates.size(); ++b)
            if (rng.uniform() < 0.3 || inst.templates[a].subject_id == inst.templates[b].subject_id)
                inst.pairs.push_back({a, b, inst.templates[a].subject_id == inst.templates[b].subject_id});
    // First template of each subject (index < subjects) enrols; the rest probe.
    for (std::size_t t = 0; t < inst.templates.size(); ++t) {
        if (t < static_cast<std::size_t>(subjects)) inst.gallery.push_back(inst.templates[t]);
        else inst.probes.push_back(inst.templates[t]);
    }
    inst.w = Eigen::MatrixXd(dim, embed_dim);
    for (Eigen::Index i = 0; i < inst.w.size(); ++i) inst.w.data()[i] = rng.normal();
    return inst;
}

std::vector<templar::LandmarkSample> landmark_dataset(templar::Rng& rng, int n, int size) {
    const double s0 = size / 100.0;
    std::vector<templar::LandmarkSample> out;
    for (int i = 0; i < n; ++i) {
        const templar::SimilarityTransform place{s0 * rng.uniform(0.9, 1.1), rng.uniform(-0.15, 0.15),
                                                 rng.uniform(-4, 4), rng.uniform(-4, 4)};
        templar::Shape truth;
        for (const auto& c : templar::kDefaultCanonical) truth.push_back(templar::apply_transform(place, c));
        templar::Image img(size, size, 1);
        const double gx = rng.uniform(-0.004, 0.004), gy = rng.uniform(-0.004, 0.004);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double v = 0.7 + gx * (x - size / 2) + gy * (y - size / 2) + 0.02 * rng.normal();
                for (const auto& p : truth) {
                    const double r2 = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y);
                    v -= 0.5 * std::exp(-r2 / (2.0 * 2.5 * 2.5));
                }
                img.at(y, x, 0) = std::clamp(v, 0.0, 1.0);
            }
        out.push_back({std::move(img), std::move(truth)});
    }
    return out;
}

std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("templar_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
