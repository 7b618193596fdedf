#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "templar/embed_train.hpp"
#include "templar/featnet.hpp"
#include "templar/geom_align.hpp"
#include "templar/landmarks.hpp"
#include "templar/template_eval.hpp"

namespace templar::cli {

/// Usage and configuration problems; mapped to exit status 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computed artifact broke one of its own invariants; exit status 3.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DetectSettings {
    int window = 8;
    double iou = 0.3;
    double threshold = 0.0;
    std::string features = "hog";  // hog | identity
};

struct PipelinePaths {
    std::filesystem::path protocol;
    std::filesystem::path images;
    std::filesystem::path store;
    std::filesystem::path weights;
    std::filesystem::path embedding;
    std::filesystem::path out;
};

struct PipelineConfig {
    std::array<Point2, 3> canonical = kDefaultCanonical;
    NetSpec netspec = reference_netspec();
    TrainConfig train;
    CascadeTrainOptions landmarks;
    DetectSettings detect;
    SetupPolicy policy = SetupPolicy::Setup1;
    std::uint64_t seed = 0;
    PipelinePaths paths;
};

/// JSON config. Every key is optional; relative paths resolve against the
/// config file's directory. `netspec` is "reference", a path to a layer file,
/// or an inline array of layer lines.
PipelineConfig load_config(const std::filesystem::path& path);

/// Loads `path` when non-empty, otherwise returns the defaults.
PipelineConfig load_config_or_default(const std::filesystem::path& path);

}  // namespace templar::cli
