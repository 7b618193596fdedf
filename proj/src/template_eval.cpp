#include "templar/template_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "templar/error.hpp"
#include "templar/parallel.hpp"

namespace templar {

namespace {

constexpr double kLowestSimilarity = -1.0;
constexpr int kReportedRanks[] = {1, 5, 10};

Eigen::VectorXd normalized(Eigen::VectorXd v) {
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::clamp(a.dot(b), -1.0, 1.0);
}

std::vector<std::optional<Eigen::VectorXd>> describe_all(std::span<const Template> templates,
                                                        const EmbeddingMatrix& w) {
    std::vector<std::optional<Eigen::VectorXd>> out(templates.size());
    parallel_for(templates.size(), [&](std::size_t i) { out[i] = template_descriptor(templates[i], w); });
    return out;
}

std::optional<double> score_descriptors(const std::optional<Eigen::VectorXd>& a,
                                        const std::optional<Eigen::VectorXd>& b, SetupPolicy policy) {
    if (a && b) return cosine(*a, *b);
    if (policy == SetupPolicy::Setup1) return std::nullopt;
    return kLowestSimilarity;
}

}  // namespace

const char* to_string(SetupPolicy policy) { return policy == SetupPolicy::Setup1 ? "setup1" : "setup2"; }

SetupPolicy parse_policy(std::string_view text) {
    if (text == "setup1") return SetupPolicy::Setup1;
    if (text == "setup2") return SetupPolicy::Setup2;
    raise(ErrorCode::InvalidArgument, "policy must be setup1 or setup2, got '" + std::string(text) + "'");
}

std::optional<Eigen::VectorXd> template_descriptor(const Template& t, const EmbeddingMatrix& w) {
    if (t.unprocessable()) return std::nullopt;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(w.output_dim());
    for (const auto& d : t.media) sum += normalized(embed(w, d));
    return normalized(sum / static_cast<double>(t.media.size()));
}

std::optional<double> score_pair(const Template& a, const Template& b, const EmbeddingMatrix& w, SetupPolicy policy) {
    return score_descriptors(template_descriptor(a, w), template_descriptor(b, w), policy);
}

VerifReport verification_report(std::span<const double> genuine, std::span<const double> impostor,
                                std::span<const double> far_targets) {
    if (genuine.empty() || impostor.empty()) {
        raise(ErrorCode::DegenerateProtocol, "verification needs both genuine (" + std::to_string(genuine.size()) +
                                                 ") and impostor (" + std::to_string(impostor.size()) + ") pairs");
    }
    std::vector<double> g(genuine.begin(), genuine.end()), im(impostor.begin(), impostor.end());
    std::sort(g.begin(), g.end(), std::greater<>());
    std::sort(im.begin(), im.end(), std::greater<>());
    std::vector<double> thresholds;
    thresholds.reserve(g.size() + im.size());
    std::merge(g.begin(), g.end(), im.begin(), im.end(), std::back_inserter(thresholds), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    VerifReport r;
    r.n_genuine = g.size();
    r.n_impostor = im.size();
    r.n_pairs_used = g.size() + im.size();
    const double ng = static_cast<double>(g.size()), ni = static_cast<double>(im.size());
    r.roc.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t gi = 0, ii = 0;
    for (double t : thresholds) {
        while (gi < g.size() && g[gi] >= t) ++gi;
        while (ii < im.size() && im[ii] >= t) ++ii;
        r.roc.push_back({static_cast<double>(ii) / ni, static_cast<double>(gi) / ng, t});
    }
    for (double target : far_targets) {
        double best = 0.0;
        for (const auto& p : r.roc) {
            if (p.far <= target) best = std::max(best, p.tar);
        }
        r.tar_at[target] = best;
    }
    return r;
}

VerifReport eval_verification(std::span<const Template> templates, std::span<const VerificationPair> pairs,
                              const EmbeddingMatrix& w, SetupPolicy policy, std::span<const double> far_targets) {
    for (const auto& p : pairs) {
        if (p.a >= templates.size() || p.b >= templates.size()) {
            raise(ErrorCode::InvalidArgument, "verification pair references a missing template");
        }
    }
    const auto desc = describe_all(templates, w);
    std::vector<std::optional<double>> scores(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        scores[i] = score_descriptors(desc[pairs[i].a], desc[pairs[i].b], policy);
    });
    std::vector<double> genuine, impostor;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!scores[i]) {
            ++skipped;
            continue;
        }
        (pairs[i].genuine ? genuine : impostor).push_back(*scores[i]);
    }
    VerifReport r = verification_report(genuine, impostor, far_targets);
    r.n_pairs_skipped = skipped;
    r.pair_scores = std::move(scores);
    return r;
}

IdentReport eval_identification(std::span<const Template> probes, std::span<const Template> gallery,
                                const EmbeddingMatrix& w, SetupPolicy policy) {
    if (gallery.empty()) raise(ErrorCode::DegenerateProtocol, "identification gallery is empty");
    for (const auto& p : probes) {
        const bool mated = std::any_of(gallery.begin(), gallery.end(),
                                       [&](const Template& g) { return g.subject_id == p.subject_id; });
        if (!mated) {
            raise(ErrorCode::MissingMate, "probe '" + p.template_id + "' has no gallery template of subject '" +
                                              p.subject_id + "'");
        }
    }
    const auto gallery_desc = describe_all(gallery, w);
    const auto probe_desc = describe_all(probes, w);
    const std::size_t gsize = gallery.size();

    IdentReport r;
    r.probe_ranks.resize(probes.size());
    parallel_for(probes.size(), [&](std::size_t pi) {
        if (!probe_desc[pi]) {
            if (policy == SetupPolicy::Setup2) r.probe_ranks[pi] = gsize;
            return;
        }
        std::vector<std::optional<double>> scores(gsize);
        for (std::size_t g = 0; g < gsize; ++g) scores[g] = score_descriptors(probe_desc[pi], gallery_desc[g], policy);
        std::optional<std::size_t> best;
        for (std::size_t m = 0; m < gsize; ++m) {
            if (gallery[m].subject_id != probes[pi].subject_id || !scores[m]) continue;
            std::size_t ahead = 0;
            for (std::size_t g = 0; g < gsize; ++g) {
                if (!scores[g] || g == m) continue;
                if (*scores[g] > *scores[m] ||
                    (*scores[g] == *scores[m] && gallery[g].template_id < gallery[m].template_id)) {
                    ++ahead;
                }
            }
            if (!best || ahead + 1 < *best) best = ahead + 1;
        }
        r.probe_ranks[pi] = best;
    });

    std::vector<std::size_t> hits(gsize + 1, 0);
    for (const auto& rank : r.probe_ranks) {
        if (rank) {
            ++hits[*rank];
            ++r.n_probes_used;
        } else {
            ++r.n_probes_skipped;
        }
    }
    if (r.n_probes_used == 0) raise(ErrorCode::DegenerateProtocol, "no probe could be ranked");
    r.cmc.resize(gsize);
    std::size_t cumulative = 0;
    for (std::size_t k = 1; k <= gsize; ++k) {
        cumulative += hits[k];
        r.cmc[k - 1] = static_cast<double>(cumulative) / static_cast<double>(r.n_probes_used);
    }
    for (int k : kReportedRanks) r.rank_at[k] = r.cmc[std::min<std::size_t>(static_cast<std::size_t>(k), gsize) - 1];
    return r;
}

MetricMap metrics_of(const VerifReport& r) {
    MetricMap m;
    for (const auto& [far, tar] : r.tar_at) {
        char key[48];
        std::snprintf(key, sizeof key, "tar@far=%g", far);
        m[key] = tar;
    }
    return m;
}

MetricMap metrics_of(const IdentReport& r) {
    MetricMap m;
    for (const auto& [k, acc] : r.rank_at) m["rank" + std::to_string(k)] = acc;
    return m;
}

SplitSummary aggregate_splits(std::span<const MetricMap> splits) {
    if (splits.empty()) raise(ErrorCode::EmptyInput, "no split reports to aggregate");
    for (const auto& s : splits) {
        if (s.size() != splits.front().size() ||
            !std::equal(s.begin(), s.end(), splits.front().begin(),
                        [](const auto& a, const auto& b) { return a.first == b.first; })) {
            raise(ErrorCode::ConsistencyError, "split reports do not share metric keys");
        }
    }
    SplitSummary out;
    out.splits.assign(splits.begin(), splits.end());
    const double n = static_cast<double>(splits.size());
    for (const auto& [key, unused] : splits.front()) {
        double sum = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& s : splits) {
            sum += s.at(key);
            lo = std::min(lo, s.at(key));
            hi = std::max(hi, s.at(key));
        }
        // Rounding in the sum can push the mean a few ulps outside the data.
        const double mean = std::clamp(sum / n, lo, hi);
        double sq = 0.0;
        for (const auto& s : splits) sq += (s.at(key) - mean) * (s.at(key) - mean);
        out.mean[key] = mean;
        out.stddev[key] = std::sqrt(sq / n);
    }
    return out;
}

}  // namespace templar
