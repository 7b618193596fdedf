#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "templar/image.hpp"

namespace templar {

struct ConvLayer {
    int out_channels = 1;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
};
struct MaxPoolLayer {
    int kernel = 2;
    int stride = 2;
};
struct ReluLayer {};
struct FullyConnectedLayer {
    int out_dim = 1;
};

using Layer = std::variant<ConvLayer, MaxPoolLayer, ReluLayer, FullyConnectedLayer>;

struct TensorShape {
    int height = 1;
    int width = 1;
    int channels = 1;

    std::size_t size() const { return static_cast<std::size_t>(height) * width * channels; }
    bool operator==(const TensorShape&) const = default;
};

struct NetSpec {
    TensorShape input{100, 100, 3};
    std::vector<Layer> layers;
};

/// Plain-text layer list, one per line, `#` starts a comment:
///
///   input 100 100 3
///   conv <out_channels> <kernel> <stride> <pad>
///   maxpool <kernel> <stride>
///   relu
///   fc <out_dim>
NetSpec parse_netspec(std::string_view text);
std::string format_netspec(const NetSpec& spec);

/// 10 conv (3×3, pad 1) in five pairs, each pair followed by a 2×2 max-pool,
/// then one fully connected layer: 100×100×3 → 320.
NetSpec reference_netspec();

std::string describe(const Layer& layer);

struct LayerCounts {
    int conv = 0;
    int pool = 0;
    int relu = 0;
    int fc = 0;
};
LayerCounts count_layers(const NetSpec& spec);

/// Output shape after every layer. A fully connected output is 1×1×out_dim.
/// Throws ShapeMismatch naming the first layer that cannot be applied.
std::vector<TensorShape> validate_spec(const NetSpec& spec, const TensorShape& input);
inline std::vector<TensorShape> validate_spec(const NetSpec& spec) { return validate_spec(spec, spec.input); }

/// Parameters of one conv or fc layer. Conv weights are out × (in·k·k)
/// indexed (c, ky, kx); fc weights are out × in over the flattened input.
struct LayerParams {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    bool operator==(const LayerParams& o) const { return weight == o.weight && bias == o.bias; }
};

/// One LayerParams per conv/fc layer, in spec order.
struct NetWeights {
    std::vector<LayerParams> params;

    bool operator==(const NetWeights&) const = default;
};

NetWeights zero_weights(const NetSpec& spec);
/// He-uniform weights, zero biases.
NetWeights init_weights(const NetSpec& spec, std::uint64_t seed);
void check_weights(const NetSpec& spec, const NetWeights& weights);

struct Descriptor {
    std::vector<double> values;
    std::string source_id;
};

/// Activations flattened channel-major: index (c·H + y)·W + x.
std::vector<double> forward_prefix(const NetSpec& spec, const NetWeights& weights, const Image& input,
                                   std::size_t layer_count);

/// Full forward pass. Convolution is cross-correlation plus bias, max-pool a
/// window max, relu max(0,·), fc W·flatten + b.
Descriptor forward(const NetSpec& spec, const NetWeights& weights, const Image& input,
                   std::string source_id = {});

void save_weights(const std::filesystem::path& path, const NetWeights& weights);
/// Throws FormatError on container errors or when dims disagree with `spec`.
NetWeights load_weights(const std::filesystem::path& path, const NetSpec& spec);

}  // namespace templar
