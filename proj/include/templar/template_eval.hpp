#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "templar/embed_train.hpp"

namespace templar {

/// How comparisons involving templates with no processable media are treated.
///   Setup1: the comparison is ignored (pair skipped, probe excluded).
///   Setup2: a forced pessimistic decision (score −1, probe rank = gallery size).
enum class SetupPolicy { Setup1, Setup2 };

const char* to_string(SetupPolicy policy);
SetupPolicy parse_policy(std::string_view text);

struct Template {
    std::string template_id;
    std::string subject_id;
    std::vector<Eigen::VectorXd> media;  // raw descriptors; empty when nothing was detected

    bool unprocessable() const { return media.empty(); }
};

/// Mean of the L2-normalized media embeddings, re-normalized; nullopt for an
/// unprocessable template. Zero vectors stay zero. Throws DimMismatch.
std::optional<Eigen::VectorXd> template_descriptor(const Template& t, const EmbeddingMatrix& w);

/// Cosine similarity in [−1, 1]; nullopt when skipped under Setup1.
std::optional<double> score_pair(const Template& a, const Template& b, const EmbeddingMatrix& w, SetupPolicy policy);

struct RocPoint {
    double far = 0.0;
    double tar = 0.0;
    double threshold = 0.0;  // accept when score >= threshold; +inf for the origin

    bool operator==(const RocPoint&) const = default;
};

struct VerifReport {
    std::vector<RocPoint> roc;        // sorted by FAR, starts at (0, 0)
    std::map<double, double> tar_at;  // target FAR → TAR
    std::size_t n_pairs_used = 0;
    std::size_t n_pairs_skipped = 0;
    std::size_t n_genuine = 0;
    std::size_t n_impostor = 0;
    std::vector<std::optional<double>> pair_scores;  // input order; nullopt = skipped

    bool operator==(const VerifReport&) const = default;
};

inline const std::vector<double> kDefaultFarTargets = {1e-2, 1e-1};

/// ROC by sweeping every distinct score as an acceptance threshold. TAR@FAR
/// is the highest TAR among operating points whose FAR does not exceed the
/// target. Throws DegenerateProtocol without both genuine and impostor scores.
VerifReport verification_report(std::span<const double> genuine, std::span<const double> impostor,
                                std::span<const double> far_targets = kDefaultFarTargets);

struct VerificationPair {
    std::size_t a = 0;  // indices into the template list
    std::size_t b = 0;
    bool genuine = false;
};

VerifReport eval_verification(std::span<const Template> templates, std::span<const VerificationPair> pairs,
                              const EmbeddingMatrix& w, SetupPolicy policy,
                              std::span<const double> far_targets = kDefaultFarTargets);

struct IdentReport {
    std::vector<double> cmc;        // cmc[k-1] = fraction of counted probes with rank <= k
    std::map<int, double> rank_at;  // 1, 5, 10 (clamped to the gallery size)
    std::size_t n_probes_used = 0;
    std::size_t n_probes_skipped = 0;
    std::vector<std::optional<std::size_t>> probe_ranks;  // input order; nullopt = excluded

    bool operator==(const IdentReport&) const = default;
};

/// Rank of a probe is the 1-based position of its best mated gallery template
/// when the gallery is ordered by descending score, ties by template_id.
/// Under Setup1 unprocessable gallery templates drop out of the ordering and a
/// probe with no remaining mate is excluded; under Setup2 they score −1.
/// Throws MissingMate, or DegenerateProtocol for an empty gallery or when no
/// probe can be counted.
IdentReport eval_identification(std::span<const Template> probes, std::span<const Template> gallery,
                                const EmbeddingMatrix& w, SetupPolicy policy);

using MetricMap = std::map<std::string, double>;

MetricMap metrics_of(const VerifReport& r);
MetricMap metrics_of(const IdentReport& r);

struct SplitSummary {
    std::vector<MetricMap> splits;
    MetricMap mean;
    MetricMap stddev;  // population (divide by N)
};

/// Throws EmptyInput for no splits, ConsistencyError when metric keys differ.
SplitSummary aggregate_splits(std::span<const MetricMap> splits);

}  // namespace templar
