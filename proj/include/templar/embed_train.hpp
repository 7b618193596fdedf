#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace templar {

/// Projection W (M×n) from descriptor space to the embedding space.
struct EmbeddingMatrix {
    Eigen::MatrixXd w;

    Eigen::Index input_dim() const { return w.rows(); }
    Eigen::Index output_dim() const { return w.cols(); }
};

/// Indices into the descriptor set: label(anchor) == label(positive) !=
/// label(negative), anchor != positive.
struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;

    bool operator==(const Triplet&) const = default;
};

struct TrainConfig {
    double margin = 0.2;
    double learning_rate = 0.05;  // decays as lr/√epoch
    int epochs = 20;
    int batch_size = 64;
    std::size_t triplets_per_epoch = 10000;
    std::uint64_t seed = 0;
    int embedding_dim = 128;
    /// Measure distances between L2-normalized embeddings instead of raw Wᵀx.
    bool normalize_embeddings = false;
};

/// Number of valid triplets for the labelling.
std::uint64_t count_valid_triplets(std::span<const int> labels);

/// min(budget, available) distinct valid triplets drawn uniformly; the same
/// (labels, budget, seed) always yields the same list. Throws
/// InsufficientClasses when no valid triplet exists.
std::vector<Triplet> generate_triplets(std::span<const int> labels, std::size_t budget, std::uint64_t seed);

bool is_valid_triplet(std::span<const int> labels, const Triplet& t);

/// Wᵀd. Throws DimMismatch.
Eigen::VectorXd embed(const EmbeddingMatrix& w, const Eigen::VectorXd& descriptor);

/// Seeded uniform(−1/√M, 1/√M) initialization.
EmbeddingMatrix initial_embedding(int input_dim, int output_dim, std::uint64_t seed);

/// Hinge value α + ‖f(a) − f(p)‖² − ‖f(a) − f(n)‖² before clamping, where f
/// is Wᵀx (optionally L2-normalized). Descriptors are the columns of `x`.
double triplet_margin_violation(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const Triplet& t,
                                double margin, bool normalize);

/// Mean hinged triplet loss over the batch.
double batch_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::span<const Triplet> batch,
                  double margin, bool normalize);

/// Gradient of batch_loss with respect to W. Triplets whose hinge is zero
/// contribute nothing.
Eigen::MatrixXd batch_gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::span<const Triplet> batch,
                               double margin, bool normalize);

/// W ← W − lr·∇(batch loss). Returns the batch loss evaluated before the step.
double sgd_step(Eigen::MatrixXd& w, const Eigen::MatrixXd& x, std::span<const Triplet> batch, double lr,
                double margin, bool normalize);

struct TrainResult {
    EmbeddingMatrix embedding;
    std::vector<double> epoch_loss;  // mean pre-step triplet loss per epoch
};

/// Mini-batch SGD on the hinged triplet loss; triplets are resampled every
/// epoch. Descriptors are the columns of `x` (M×N). epochs = 0 returns the
/// initialization untouched. Throws DimMismatch / InsufficientClasses.
TrainResult train_embedding(const Eigen::MatrixXd& x, std::span<const int> labels, const TrainConfig& cfg);

void save_embedding(const std::filesystem::path& path, const EmbeddingMatrix& w);
EmbeddingMatrix load_embedding(const std::filesystem::path& path);

}  // namespace templar
