#include "templar/featnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "templar/atomic_file.hpp"
#include "templar/container.hpp"
#include "templar/error.hpp"
#include "templar/protocol.hpp"
#include "templar/rng.hpp"

namespace templar {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::string layer_name(std::size_t index, const Layer& layer) {
    return "layer " + std::to_string(index) + " (" + describe(layer) + ")";
}

bool has_params(const Layer& layer) {
    return std::holds_alternative<ConvLayer>(layer) || std::holds_alternative<FullyConnectedLayer>(layer);
}

/// Channel-major activation: rows = channels, cols = H·W.
struct Activation {
    TensorShape shape;
    Eigen::MatrixXd data;
};

Activation from_image(const Image& img) {
    Activation a{{img.height(), img.width(), img.channels()},
                 Eigen::MatrixXd(img.channels(), static_cast<Eigen::Index>(img.height()) * img.width())};
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) a.data(c, y * img.width() + x) = img.at(y, x, c);
    return a;
}

Activation run_conv(const Activation& in, const ConvLayer& conv, const LayerParams& p, const TensorShape& out_shape) {
    const int k = conv.kernel, s = conv.stride, pad = conv.pad;
    const int ho = out_shape.height, wo = out_shape.width;
    const int cin = in.shape.channels;
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cin) * k * k,
                                                 static_cast<Eigen::Index>(ho) * wo);
    for (int c = 0; c < cin; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s - pad + ky;
                    if (iy < 0 || iy >= in.shape.height) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * s - pad + kx;
                        if (ix < 0 || ix >= in.shape.width) continue;
                        cols(row, oy * wo + ox) = in.data(c, iy * in.shape.width + ix);
                    }
                }
            }
        }
    }
    Activation out{out_shape, p.weight * cols};
    out.data.colwise() += p.bias;
    return out;
}

Activation run_pool(const Activation& in, const MaxPoolLayer& pool, const TensorShape& out_shape) {
    Activation out{out_shape, Eigen::MatrixXd(in.shape.channels, static_cast<Eigen::Index>(out_shape.height) * out_shape.width)};
    for (int c = 0; c < in.shape.channels; ++c) {
        for (int oy = 0; oy < out_shape.height; ++oy) {
            for (int ox = 0; ox < out_shape.width; ++ox) {
                double m = -std::numeric_limits<double>::infinity();
                for (int ky = 0; ky < pool.kernel; ++ky)
                    for (int kx = 0; kx < pool.kernel; ++kx)
                        m = std::max(m, in.data(c, (oy * pool.stride + ky) * in.shape.width + ox * pool.stride + kx));
                out.data(c, oy * out_shape.width + ox) = m;
            }
        }
    }
    return out;
}

Activation run_fc(const Activation& in, const LayerParams& p, const TensorShape& out_shape) {
    // Row-major flatten of the channel-major matrix gives (c·H + y)·W + x.
    Eigen::VectorXd flat(in.data.size());
    for (Eigen::Index c = 0; c < in.data.rows(); ++c) flat.segment(c * in.data.cols(), in.data.cols()) = in.data.row(c).transpose();
    Eigen::VectorXd y = p.weight * flat + p.bias;
    return {out_shape, Eigen::MatrixXd(y)};
}

std::vector<double> flatten(const Activation& a) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(a.data.size()));
    for (Eigen::Index c = 0; c < a.data.rows(); ++c)
        for (Eigen::Index i = 0; i < a.data.cols(); ++i) out.push_back(a.data(c, i));
    return out;
}

}  // namespace

std::string describe(const Layer& layer) {
    return std::visit(overloaded{
                          [](const ConvLayer& l) {
                              return "conv " + std::to_string(l.out_channels) + " " + std::to_string(l.kernel) + " " +
                                     std::to_string(l.stride) + " " + std::to_string(l.pad);
                          },
                          [](const MaxPoolLayer& l) {
                              return "maxpool " + std::to_string(l.kernel) + " " + std::to_string(l.stride);
                          },
                          [](const ReluLayer&) { return std::string("relu"); },
                          [](const FullyConnectedLayer& l) { return "fc " + std::to_string(l.out_dim); },
                      },
                      layer);
}

NetSpec parse_netspec(std::string_view text) {
    NetSpec spec;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool saw_layer = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string kind;
        if (!(fields >> kind)) continue;
        std::vector<long> args;
        std::string tok;
        while (fields >> tok) {
            const auto v = parse_double(tok);
            if (!v || *v != std::floor(*v) || *v < 0 || *v > 1e9) {
                raise(ErrorCode::ParseError, "netspec line " + std::to_string(line_no) + ": bad integer '" + tok + "'");
            }
            args.push_back(static_cast<long>(*v));
        }
        auto expect = [&](std::size_t n) {
            if (args.size() != n) {
                raise(ErrorCode::ParseError, "netspec line " + std::to_string(line_no) + ": '" + kind + "' takes " +
                                                 std::to_string(n) + " arguments");
            }
        };
        auto positive = [&](std::size_t i) {
            if (args[i] <= 0) {
                raise(ErrorCode::ParseError, "netspec line " + std::to_string(line_no) + ": argument " +
                                                 std::to_string(i + 1) + " must be positive");
            }
            return static_cast<int>(args[i]);
        };
        if (kind == "input") {
            if (saw_layer) raise(ErrorCode::ParseError, "netspec line " + std::to_string(line_no) + ": input after layers");
            expect(3);
            spec.input = {positive(0), positive(1), positive(2)};
            continue;
        }
        saw_layer = true;
        if (kind == "conv") {
            expect(4);
            spec.layers.emplace_back(ConvLayer{positive(0), positive(1), positive(2), static_cast<int>(args[3])});
        } else if (kind == "maxpool") {
            expect(2);
            spec.layers.emplace_back(MaxPoolLayer{positive(0), positive(1)});
        } else if (kind == "relu") {
            expect(0);
            spec.layers.emplace_back(ReluLayer{});
        } else if (kind == "fc") {
            expect(1);
            spec.layers.emplace_back(FullyConnectedLayer{positive(0)});
        } else {
            raise(ErrorCode::ParseError, "netspec line " + std::to_string(line_no) + ": unknown layer '" + kind + "'");
        }
    }
    return spec;
}

std::string format_netspec(const NetSpec& spec) {
    std::string out = "input " + std::to_string(spec.input.height) + " " + std::to_string(spec.input.width) + " " +
                      std::to_string(spec.input.channels) + "\n";
    for (const auto& layer : spec.layers) out += describe(layer) + "\n";
    return out;
}

NetSpec reference_netspec() {
    NetSpec spec;
    spec.input = {100, 100, 3};
    constexpr int widths[5][2] = {{32, 64}, {64, 128}, {96, 192}, {128, 256}, {160, 320}};
    for (const auto& block : widths) {
        for (int out : block) {
            spec.layers.emplace_back(ConvLayer{out, 3, 1, 1});
            spec.layers.emplace_back(ReluLayer{});
        }
        spec.layers.emplace_back(MaxPoolLayer{2, 2});
    }
    spec.layers.emplace_back(FullyConnectedLayer{320});
    return spec;
}

LayerCounts count_layers(const NetSpec& spec) {
    LayerCounts n;
    for (const auto& layer : spec.layers) {
        std::visit(overloaded{[&](const ConvLayer&) { ++n.conv; }, [&](const MaxPoolLayer&) { ++n.pool; },
                              [&](const ReluLayer&) { ++n.relu; }, [&](const FullyConnectedLayer&) { ++n.fc; }},
                   layer);
    }
    return n;
}

std::vector<TensorShape> validate_spec(const NetSpec& spec, const TensorShape& input) {
    if (input.height <= 0 || input.width <= 0 || input.channels <= 0) {
        raise(ErrorCode::ShapeMismatch, "input shape must be positive");
    }
    std::vector<TensorShape> trace;
    TensorShape cur = input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const Layer& layer = spec.layers[i];
        auto fail = [&](const std::string& why) {
            raise(ErrorCode::ShapeMismatch, layer_name(i, layer) + ": " + why + " on input " +
                                                std::to_string(cur.height) + "x" + std::to_string(cur.width) + "x" +
                                                std::to_string(cur.channels));
        };
        std::visit(overloaded{
                       [&](const ConvLayer& l) {
                           if (l.kernel <= 0 || l.stride <= 0 || l.pad < 0 || l.out_channels <= 0) fail("invalid parameters");
                           const int span_h = cur.height + 2 * l.pad - l.kernel;
                           const int span_w = cur.width + 2 * l.pad - l.kernel;
                           if (span_h < 0 || span_w < 0) fail("kernel larger than padded input");
                           cur = {span_h / l.stride + 1, span_w / l.stride + 1, l.out_channels};
                       },
                       [&](const MaxPoolLayer& l) {
                           if (l.kernel <= 0 || l.stride <= 0) fail("invalid parameters");
                           if (cur.height < l.kernel || cur.width < l.kernel) fail("window larger than input");
                           cur = {(cur.height - l.kernel) / l.stride + 1, (cur.width - l.kernel) / l.stride + 1,
                                  cur.channels};
                       },
                       [&](const ReluLayer&) {},
                       [&](const FullyConnectedLayer& l) {
                           if (l.out_dim <= 0) fail("invalid output size");
                           cur = {1, 1, l.out_dim};
                       },
                   },
                   layer);
        trace.push_back(cur);
    }
    return trace;
}

NetWeights zero_weights(const NetSpec& spec) {
    const auto trace = validate_spec(spec);
    NetWeights w;
    TensorShape in = spec.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (const auto* conv = std::get_if<ConvLayer>(&spec.layers[i])) {
            w.params.push_back({Eigen::MatrixXd::Zero(conv->out_channels,
                                                      static_cast<Eigen::Index>(in.channels) * conv->kernel * conv->kernel),
                                Eigen::VectorXd::Zero(conv->out_channels)});
        } else if (const auto* fc = std::get_if<FullyConnectedLayer>(&spec.layers[i])) {
            w.params.push_back({Eigen::MatrixXd::Zero(fc->out_dim, static_cast<Eigen::Index>(in.size())),
                                Eigen::VectorXd::Zero(fc->out_dim)});
        }
        in = trace[i];
    }
    return w;
}

NetWeights init_weights(const NetSpec& spec, std::uint64_t seed) {
    NetWeights w = zero_weights(spec);
    Rng rng(seed);
    for (auto& p : w.params) {
        const double bound = std::sqrt(6.0 / static_cast<double>(p.weight.cols()));
        for (Eigen::Index i = 0; i < p.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < p.weight.cols(); ++j) p.weight(i, j) = rng.uniform(-bound, bound);
    }
    return w;
}

void check_weights(const NetSpec& spec, const NetWeights& weights) {
    const NetWeights expected = zero_weights(spec);
    std::size_t param_index = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        if (!has_params(spec.layers[i])) continue;
        if (param_index >= weights.params.size()) {
            raise(ErrorCode::ShapeMismatch, layer_name(i, spec.layers[i]) + ": no weights supplied");
        }
        const auto& want = expected.params[param_index];
        const auto& got = weights.params[param_index];
        if (got.weight.rows() != want.weight.rows() || got.weight.cols() != want.weight.cols() ||
            got.bias.size() != want.bias.size()) {
            raise(ErrorCode::ShapeMismatch,
                  layer_name(i, spec.layers[i]) + ": weights " + std::to_string(got.weight.rows()) + "x" +
                      std::to_string(got.weight.cols()) + " bias " + std::to_string(got.bias.size()) + ", expected " +
                      std::to_string(want.weight.rows()) + "x" + std::to_string(want.weight.cols()) + " bias " +
                      std::to_string(want.bias.size()));
        }
        ++param_index;
    }
    if (param_index != weights.params.size()) {
        raise(ErrorCode::ShapeMismatch, std::to_string(weights.params.size() - param_index) + " surplus weight layers");
    }
}

std::vector<double> forward_prefix(const NetSpec& spec, const NetWeights& weights, const Image& input,
                                   std::size_t layer_count) {
    const TensorShape in_shape{input.height(), input.width(), input.channels()};
    if (!(in_shape == spec.input)) {
        raise(ErrorCode::ShapeMismatch, "input is " + std::to_string(in_shape.height) + "x" +
                                            std::to_string(in_shape.width) + "x" + std::to_string(in_shape.channels) +
                                            ", spec expects " + std::to_string(spec.input.height) + "x" +
                                            std::to_string(spec.input.width) + "x" + std::to_string(spec.input.channels));
    }
    const auto trace = validate_spec(spec);
    check_weights(spec, weights);
    layer_count = std::min(layer_count, spec.layers.size());
    Activation act = from_image(input);
    std::size_t param_index = 0;
    for (std::size_t i = 0; i < layer_count; ++i) {
        const TensorShape& out = trace[i];
        std::visit(overloaded{
                       [&](const ConvLayer& l) { act = run_conv(act, l, weights.params[param_index++], out); },
                       [&](const MaxPoolLayer& l) { act = run_pool(act, l, out); },
                       [&](const ReluLayer&) { act.data = act.data.cwiseMax(0.0); },
                       [&](const FullyConnectedLayer&) { act = run_fc(act, weights.params[param_index++], out); },
                   },
                   spec.layers[i]);
    }
    return flatten(act);
}

Descriptor forward(const NetSpec& spec, const NetWeights& weights, const Image& input, std::string source_id) {
    return {forward_prefix(spec, weights, input, spec.layers.size()), std::move(source_id)};
}

void save_weights(const std::filesystem::path& path, const NetWeights& weights) {
    std::vector<std::uint8_t> bytes;
    for (const auto& p : weights.params) {
        append_record(bytes, to_record(ContainerRole::Weights, p.weight));
        append_record(bytes, to_record(ContainerRole::Weights, Eigen::MatrixXd(p.bias)));
    }
    write_file_atomic(path, bytes);
}

NetWeights load_weights(const std::filesystem::path& path, const NetSpec& spec) {
    const auto bytes = read_file_bytes(path);
    const NetWeights expected = zero_weights(spec);
    RecordReader reader(bytes);
    NetWeights w;
    std::size_t layer = 0;
    for (const auto& want : expected.params) {
        while (!has_params(spec.layers[layer])) ++layer;
        const std::string name = layer_name(layer, spec.layers[layer]);
        ++layer;
        if (reader.at_end()) raise(ErrorCode::FormatError, "weights file ends before " + name);
        const MatrixRecord weight = reader.next(ContainerRole::Weights);
        if (weight.rows != static_cast<std::uint64_t>(want.weight.rows()) ||
            weight.cols != static_cast<std::uint64_t>(want.weight.cols())) {
            raise(ErrorCode::FormatError, name + ": stored weight is " + std::to_string(weight.rows) + "x" +
                                              std::to_string(weight.cols) + ", spec needs " +
                                              std::to_string(want.weight.rows()) + "x" + std::to_string(want.weight.cols()));
        }
        if (reader.at_end()) raise(ErrorCode::FormatError, "weights file ends before the bias of " + name);
        const MatrixRecord bias = reader.next(ContainerRole::Weights);
        if (bias.rows != static_cast<std::uint64_t>(want.bias.size()) || bias.cols != 1) {
            raise(ErrorCode::FormatError, name + ": stored bias is " + std::to_string(bias.rows) + "x" +
                                              std::to_string(bias.cols) + ", spec needs " +
                                              std::to_string(want.bias.size()) + "x1");
        }
        w.params.push_back({to_matrix(weight), to_matrix(bias).col(0)});
    }
    reader.expect_end();
    return w;
}

}  // namespace templar
