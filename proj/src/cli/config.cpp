#include "cli/config.hpp"

#include <json.hpp>

#include "templar/atomic_file.hpp"
#include "templar/error.hpp"

namespace templar::cli {

namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
    PipelineConfig cfg;
    json j;
    try {
        j = json::parse(read_file_text(path));
    } catch (const std::exception& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.what());
    }
    const std::filesystem::path base = path.parent_path();
    try {
        if (!j.is_object()) throw ConfigError("config root must be an object");
        read_opt(j, "seed", cfg.seed);
        if (j.contains("policy")) cfg.policy = parse_policy(j.at("policy").get<std::string>());
        if (j.contains("canonical")) {
            const auto& pts = j.at("canonical");
            if (!pts.is_array() || pts.size() != 3) throw ConfigError("canonical must list 3 points");
            for (std::size_t i = 0; i < 3; ++i) cfg.canonical[i] = {pts[i].at(0).get<double>(), pts[i].at(1).get<double>()};
        }
        if (j.contains("netspec")) {
            const auto& ns = j.at("netspec");
            if (ns.is_array()) {
                std::string text;
                for (const auto& line : ns) text += line.get<std::string>() + "\n";
                cfg.netspec = parse_netspec(text);
            } else if (ns.get<std::string>() != "reference") {
                cfg.netspec = parse_netspec(read_file_text(resolve(base, ns.get<std::string>())));
            }
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            read_opt(t, "margin", cfg.train.margin);
            read_opt(t, "learning_rate", cfg.train.learning_rate);
            read_opt(t, "epochs", cfg.train.epochs);
            read_opt(t, "batch_size", cfg.train.batch_size);
            read_opt(t, "triplets_per_epoch", cfg.train.triplets_per_epoch);
            read_opt(t, "embedding_dim", cfg.train.embedding_dim);
            read_opt(t, "normalize_embeddings", cfg.train.normalize_embeddings);
        }
        if (j.contains("landmarks")) {
            const auto& l = j.at("landmarks");
            read_opt(l, "stages", cfg.landmarks.stages);
            read_opt(l, "patch_radius", cfg.landmarks.patch_radius);
            read_opt(l, "ridge_lambda", cfg.landmarks.ridge_lambda);
        }
        if (j.contains("detect")) {
            const auto& d = j.at("detect");
            read_opt(d, "window", cfg.detect.window);
            read_opt(d, "iou", cfg.detect.iou);
            read_opt(d, "threshold", cfg.detect.threshold);
            read_opt(d, "features", cfg.detect.features);
        }
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            auto path_of = [&](const char* key, std::filesystem::path& into) {
                if (p.contains(key)) into = resolve(base, p.at(key).get<std::string>());
            };
            path_of("protocol", cfg.paths.protocol);
            path_of("images", cfg.paths.images);
            path_of("store", cfg.paths.store);
            path_of("weights", cfg.paths.weights);
            path_of("embedding", cfg.paths.embedding);
            path_of("out", cfg.paths.out);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("invalid config " + path.string() + ": " + e.what());
    }
    cfg.train.seed = cfg.seed;
    return cfg;
}

PipelineConfig load_config_or_default(const std::filesystem::path& path) {
    if (path.empty()) return {};
    return load_config(path);
}

}  // namespace templar::cli
