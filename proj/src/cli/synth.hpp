#pragma once

#include <cstdint>
#include <filesystem>

namespace templar::cli {

struct SynthOptions {
    int subjects = 20;
    int templates_per_subject = 3;
    int media_per_template = 2;
    int splits = 1;
    double fail_rate = 0.0;  // fraction of templates whose media all fail detection
    int image_size = 128;
    std::uint64_t seed = 0;
};

/// Writes a deterministic synthetic identity dataset:
///   images/<media>.ppm          rendered faces (failed media are not written)
///   protocol.csv                every media row with its true landmarks
///   split<i>/train.csv          templates of the training subjects
///   split<i>/templates.csv      templates of the held-out subjects
///   split<i>/pairs.csv          all held-out template pairs
///   split<i>/ident.csv          first template per held-out subject in the
///                               gallery, the rest as probes
void write_synthetic_dataset(const std::filesystem::path& dir, const SynthOptions& options);

}  // namespace templar::cli
