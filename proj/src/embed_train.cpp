#include "templar/embed_train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_set>

#include "templar/container.hpp"
#include "templar/error.hpp"
#include "templar/rng.hpp"

namespace templar {

namespace {

struct ClassLayout {
    std::vector<std::size_t> order;           // sample indices grouped by class
    std::vector<std::size_t> block_start;     // per sample: start of its class block in `order`
    std::vector<std::size_t> block_size;      // per sample: size of its class
};

ClassLayout layout_classes(std::span<const int> labels) {
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
    ClassLayout l;
    l.block_start.resize(labels.size());
    l.block_size.resize(labels.size());
    for (const auto& [label, idx] : members) {
        const std::size_t start = l.order.size();
        for (std::size_t i : idx) {
            l.block_start[i] = start;
            l.block_size[i] = idx.size();
        }
        l.order.insert(l.order.end(), idx.begin(), idx.end());
    }
    return l;
}

std::uint64_t triplets_for_anchor(const ClassLayout& l, std::size_t i) {
    const std::uint64_t same = l.block_size[i];
    return (same - 1) * (l.order.size() - same);
}

/// Embedding of column j and the Jacobian-applying helper for the optional
/// normalization.
struct Embedded {
    Eigen::VectorXd value;  // f(x)
    Eigen::VectorXd raw;    // Wᵀx
    double norm = 1.0;
};

Embedded embed_column(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::size_t j, bool normalize) {
    Embedded e;
    e.raw = w.transpose() * x.col(static_cast<Eigen::Index>(j));
    if (normalize) {
        e.norm = e.raw.norm();
        e.value = e.norm > 0.0 ? Eigen::VectorXd(e.raw / e.norm) : e.raw;
    } else {
        e.value = e.raw;
    }
    return e;
}

/// Back-propagates dℓ/df through f = e/‖e‖ to dℓ/de.
Eigen::VectorXd through_normalization(const Embedded& e, const Eigen::VectorXd& g) {
    if (e.norm <= 0.0) return Eigen::VectorXd::Zero(g.size());
    return (g - e.value * e.value.dot(g)) / e.norm;
}

void check_dims(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x) {
    if (w.rows() != x.rows()) {
        raise(ErrorCode::DimMismatch, "embedding expects " + std::to_string(w.rows()) + "-dim descriptors, got " +
                                          std::to_string(x.rows()));
    }
}

}  // namespace

std::uint64_t count_valid_triplets(std::span<const int> labels) {
    const ClassLayout l = layout_classes(labels);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) total += triplets_for_anchor(l, i);
    return total;
}

bool is_valid_triplet(std::span<const int> labels, const Triplet& t) {
    const std::size_t n = labels.size();
    return t.anchor < n && t.positive < n && t.negative < n && t.anchor != t.positive &&
           labels[t.anchor] == labels[t.positive] && labels[t.anchor] != labels[t.negative];
}

std::vector<Triplet> generate_triplets(std::span<const int> labels, std::size_t budget, std::uint64_t seed) {
    const ClassLayout l = layout_classes(labels);
    const std::size_t n = labels.size();
    std::vector<std::uint64_t> cumulative(n);
    std::uint64_t available = 0;
    for (std::size_t i = 0; i < n; ++i) {
        available += triplets_for_anchor(l, i);
        cumulative[i] = available;
    }
    if (available == 0) {
        raise(ErrorCode::InsufficientClasses, "labels admit no valid triplet (need >=2 classes and a class with >=2 samples)");
    }
    const std::uint64_t k = std::min<std::uint64_t>(budget, available);
    Rng rng(seed);
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(k));

    if (2 * k >= available) {
        // Dense regime: enumerate everything, then a partial Fisher-Yates pick.
        std::vector<Triplet> all;
        all.reserve(static_cast<std::size_t>(available));
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t p = 0; p < n; ++p) {
                if (p == a || labels[p] != labels[a]) continue;
                for (std::size_t q = 0; q < n; ++q)
                    if (labels[q] != labels[a]) all.push_back({a, p, q});
            }
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(all[i], all[i + rng.below(all.size() - i)]);
            out.push_back(all[i]);
        }
        return out;
    }

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(static_cast<std::size_t>(2 * k));
    while (out.size() < k) {
        const std::uint64_t r = rng.below(available);
        const std::size_t a = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
        const std::size_t start = l.block_start[a], size = l.block_size[a];
        // positive: uniform over the class block minus the anchor
        std::size_t pos_slot = start + rng.below(size - 1);
        if (l.order[pos_slot] == a) pos_slot = start + size - 1;
        // negative: uniform over everything outside the block
        std::size_t neg_slot = rng.below(n - size);
        if (neg_slot >= start) neg_slot += size;
        const Triplet t{a, l.order[pos_slot], l.order[neg_slot]};
        const std::uint64_t key = (static_cast<std::uint64_t>(t.anchor) * n + t.positive) * n + t.negative;
        if (seen.insert(key).second) out.push_back(t);
    }
    return out;
}

Eigen::VectorXd embed(const EmbeddingMatrix& w, const Eigen::VectorXd& descriptor) {
    if (w.w.rows() != descriptor.size()) {
        raise(ErrorCode::DimMismatch, "embedding expects " + std::to_string(w.w.rows()) + "-dim descriptors, got " +
                                          std::to_string(descriptor.size()));
    }
    return w.w.transpose() * descriptor;
}

EmbeddingMatrix initial_embedding(int input_dim, int output_dim, std::uint64_t seed) {
    if (input_dim <= 0 || output_dim <= 0) raise(ErrorCode::InvalidArgument, "embedding dims must be positive");
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    EmbeddingMatrix e{Eigen::MatrixXd(input_dim, output_dim)};
    for (Eigen::Index i = 0; i < e.w.rows(); ++i)
        for (Eigen::Index j = 0; j < e.w.cols(); ++j) e.w(i, j) = rng.uniform(-bound, bound);
    return e;
}

double triplet_margin_violation(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const Triplet& t, double margin,
                                bool normalize) {
    const auto a = embed_column(w, x, t.anchor, normalize);
    const auto p = embed_column(w, x, t.positive, normalize);
    const auto n = embed_column(w, x, t.negative, normalize);
    return margin + (a.value - p.value).squaredNorm() - (a.value - n.value).squaredNorm();
}

double batch_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::span<const Triplet> batch, double margin,
                  bool normalize) {
    check_dims(w, x);
    if (batch.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : batch) sum += std::max(0.0, triplet_margin_violation(w, x, t, margin, normalize));
    return sum / static_cast<double>(batch.size());
}

Eigen::MatrixXd batch_gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::span<const Triplet> batch,
                               double margin, bool normalize) {
    check_dims(w, x);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    if (batch.empty()) return grad;
    const double scale = 1.0 / static_cast<double>(batch.size());
    if (!normalize) {
        // ∇ = (2/B)·Σ_active [(a−p)(a−p)ᵀ − (a−n)(a−n)ᵀ]W, built from the
        // projected differences to stay O(M·n) per triplet.
        std::vector<Eigen::Index> active_ap, active_an;
        Eigen::MatrixXd d_ap(x.rows(), static_cast<Eigen::Index>(batch.size()));
        Eigen::MatrixXd d_an(x.rows(), static_cast<Eigen::Index>(batch.size()));
        Eigen::Index m = 0;
        for (const auto& t : batch) {
            const auto a = static_cast<Eigen::Index>(t.anchor);
            d_ap.col(m) = x.col(a) - x.col(static_cast<Eigen::Index>(t.positive));
            d_an.col(m) = x.col(a) - x.col(static_cast<Eigen::Index>(t.negative));
            const double violation = margin + (w.transpose() * d_ap.col(m)).squaredNorm() -
                                     (w.transpose() * d_an.col(m)).squaredNorm();
            if (violation > 0.0) ++m;
        }
        if (m == 0) return grad;
        const auto ap = d_ap.leftCols(m);
        const auto an = d_an.leftCols(m);
        grad.noalias() = ap * (ap.transpose() * w);
        grad.noalias() -= an * (an.transpose() * w);
        return grad * (2.0 * scale);
    }
    for (const auto& t : batch) {
        const auto a = embed_column(w, x, t.anchor, true);
        const auto p = embed_column(w, x, t.positive, true);
        const auto n = embed_column(w, x, t.negative, true);
        const double violation =
            margin + (a.value - p.value).squaredNorm() - (a.value - n.value).squaredNorm();
        if (violation <= 0.0) continue;
        const Eigen::VectorXd ga = through_normalization(a, 2.0 * (n.value - p.value));
        const Eigen::VectorXd gp = through_normalization(p, -2.0 * a.value);
        const Eigen::VectorXd gn = through_normalization(n, 2.0 * a.value);
        grad.noalias() += x.col(static_cast<Eigen::Index>(t.anchor)) * ga.transpose();
        grad.noalias() += x.col(static_cast<Eigen::Index>(t.positive)) * gp.transpose();
        grad.noalias() += x.col(static_cast<Eigen::Index>(t.negative)) * gn.transpose();
    }
    return grad * scale;
}

double sgd_step(Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::span<const Triplet> batch, double lr, double margin,
                bool normalize) {
    const double loss = batch_loss(w, x, batch, margin, normalize);
    if (loss > 0.0 && lr != 0.0) w -= lr * batch_gradient(w, x, batch, margin, normalize);
    return loss;
}

TrainResult train_embedding(const Eigen::MatrixXd& x, std::span<const int> labels, const TrainConfig& cfg) {
    if (static_cast<std::size_t>(x.cols()) != labels.size()) {
        raise(ErrorCode::DimMismatch, std::to_string(x.cols()) + " descriptors but " + std::to_string(labels.size()) +
                                          " labels");
    }
    if (!(cfg.margin > 0.0) || !(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.batch_size <= 0 ||
        cfg.triplets_per_epoch == 0 || cfg.embedding_dim <= 0) {
        raise(ErrorCode::InvalidArgument, "training configuration values must be positive");
    }
    if (count_valid_triplets(labels) == 0) {
        raise(ErrorCode::InsufficientClasses, "labels admit no valid triplet");
    }
    TrainResult result{initial_embedding(static_cast<int>(x.rows()), cfg.embedding_dim, cfg.seed), {}};
    Eigen::MatrixXd& w = result.embedding.w;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Distinct, reproducible stream per epoch.
        const std::uint64_t epoch_seed = cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch);
        const auto triplets = generate_triplets(labels, cfg.triplets_per_epoch, epoch_seed);
        const double lr = cfg.learning_rate / std::sqrt(static_cast<double>(epoch));
        double total = 0.0;
        for (std::size_t start = 0; start < triplets.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), triplets.size() - start);
            const auto batch = std::span(triplets).subspan(start, len);
            total += sgd_step(w, x, batch, lr, cfg.margin, cfg.normalize_embeddings) * static_cast<double>(len);
        }
        result.epoch_loss.push_back(total / static_cast<double>(triplets.size()));
    }
    return result;
}

void save_embedding(const std::filesystem::path& path, const EmbeddingMatrix& w) {
    save_matrix(path, ContainerRole::Embedding, w.w);
}

EmbeddingMatrix load_embedding(const std::filesystem::path& path) {
    return {load_matrix(path, ContainerRole::Embedding)};
}

}  // namespace templar
