#include "cli/commands.hpp"

#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/reports.hpp"
#include "cli/synth.hpp"
#include "templar/atomic_file.hpp"
#include "templar/container.hpp"
#include "templar/descriptor_store.hpp"
#include "templar/error.hpp"
#include "templar/parallel.hpp"
#include "templar/pnm.hpp"
#include "templar/protocol.hpp"
#include "templar/pyramid_detect.hpp"
#include "templar/rng.hpp"

namespace templar::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Pipeline config file (JSON)");
    sub->add_option("--seed", c.seed, "Global seed, overrides the config");
}

PipelineConfig configure(const Common& c) {
    PipelineConfig cfg = load_config_or_default(c.config);
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.train.seed = *c.seed;
    }
    return cfg;
}

fs::path pick(const std::string& flag, const fs::path& from_config, const char* what) {
    fs::path p = flag.empty() ? from_config : fs::path(flag);
    if (p.empty()) throw ConfigError(std::string("missing required path: ") + what);
    return p;
}

fs::path require_input(const std::string& flag, const fs::path& from_config, const char* what) {
    fs::path p = pick(flag, from_config, what);
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    return p;
}

void log(const std::string& msg) { std::cerr << "[templar] " << msg << "\n"; }

fs::path split_dir(const fs::path& root, int split) {
    return split == 0 ? root : root / ("split" + std::to_string(split));
}

fs::path split_file(const fs::path& dir, const char* name) {
    return fs::is_directory(dir) ? dir / name : dir;
}

std::vector<int> split_range(int splits) {
    if (splits <= 0) return {0};
    std::vector<int> v;
    for (int i = 1; i <= splits; ++i) v.push_back(i);
    return v;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
    Common common;
    std::string protocol, images, out;
};

int cmd_align(const AlignArgs& a) {
    const PipelineConfig cfg = configure(a.common);
    const fs::path protocol = require_input(a.protocol, cfg.paths.protocol, "protocol");
    const fs::path images = require_input(a.images, cfg.paths.images, "images directory");
    const fs::path out = pick(a.out, cfg.paths.out, "output store");
    const ProtocolTable table = parse_protocol(protocol);

    std::vector<std::string> media;
    std::map<std::string, std::optional<std::array<Point2, 3>>> landmarks;
    for (const auto& row : table.rows) {
        auto [it, inserted] = landmarks.emplace(row.media_path, row.landmarks);
        if (inserted) media.push_back(row.media_path);
        else if (!it->second && row.landmarks) it->second = row.landmarks;
    }
    std::vector<std::optional<std::vector<double>>> faces(media.size());
    std::vector<std::string> failures(media.size());
    parallel_for(media.size(), [&](std::size_t i) {
        const auto& lm = landmarks.at(media[i]);
        if (!lm) {
            failures[i] = "no landmarks";
            return;
        }
        try {
            const Image img = read_pnm(images / media[i]);
            faces[i] = align_face(img, *lm, cfg.canonical, media[i]).pixels.values();
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });
    DescriptorStore store(static_cast<std::size_t>(kAlignedSize) * kAlignedSize * kAlignedChannels, ContainerRole::Aligned);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < media.size(); ++i) {
        if (faces[i]) {
            store.put(media[i], std::move(*faces[i]));
        } else {
            store.mark_unprocessable(media[i]);
            log("unprocessable " + media[i] + ": " + failures[i]);
            ++failed;
        }
    }
    store_write(store, out);
    std::cout << "aligned " << media.size() - failed << " of " << media.size() << " media (" << failed
              << " unprocessable) -> " << out.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    Common common;
    std::string netspec, weights, store, out;
};

NetSpec netspec_for(const std::string& flag, const PipelineConfig& cfg) {
    if (flag.empty()) return cfg.netspec;
    if (!fs::exists(flag)) throw ConfigError("netspec not found: " + flag);
    try {
        return parse_netspec(read_file_text(flag));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

int cmd_extract(const ExtractArgs& a) {
    const PipelineConfig cfg = configure(a.common);
    const NetSpec spec = netspec_for(a.netspec, cfg);
    const fs::path weights_path = require_input(a.weights, cfg.paths.weights, "weights");
    const fs::path store_path = require_input(a.store, {}, "aligned store");
    const fs::path out = pick(a.out, cfg.paths.out, "output store");

    const auto trace = validate_spec(spec);
    const NetWeights weights = load_weights(weights_path, spec);
    const DescriptorStore aligned = store_read(store_path);
    if (aligned.dim() != spec.input.size()) {
        raise(ErrorCode::ShapeMismatch, "aligned store holds " + std::to_string(aligned.dim()) +
                                            "-value faces, network input needs " + std::to_string(spec.input.size()));
    }
    std::vector<const std::pair<const std::string, std::optional<std::vector<double>>>*> entries;
    for (const auto& e : aligned.entries()) entries.push_back(&e);
    std::vector<std::optional<std::vector<double>>> desc(entries.size());
    parallel_for(entries.size(), [&](std::size_t i) {
        if (!entries[i]->second) return;
        const Image face(spec.input.height, spec.input.width, spec.input.channels, *entries[i]->second);
        desc[i] = forward(spec, weights, face, entries[i]->first).values;
    });
    DescriptorStore store(trace.back().size(), ContainerRole::Descriptors);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (desc[i]) store.put(entries[i]->first, std::move(*desc[i]));
        else store.mark_unprocessable(entries[i]->first);
    }
    store_write(store, out);
    std::cout << "extracted " << store.processable_count() << " descriptors of dim " << store.dim() << " -> "
              << out.string() << "\n";
    return kOk;
}

struct InitWeightsArgs {
    Common common;
    std::string netspec, out;
    bool zero = false;
};

int cmd_init_weights(const InitWeightsArgs& a) {
    const PipelineConfig cfg = configure(a.common);
    const NetSpec spec = netspec_for(a.netspec, cfg);
    const fs::path out = pick(a.out, cfg.paths.weights, "output weights");
    const NetWeights w = a.zero ? zero_weights(spec) : init_weights(spec, cfg.seed);
    save_weights(out, w);
    const auto counts = count_layers(spec);
    std::cout << "wrote " << w.params.size() << " parameter layers (" << counts.conv << " conv, " << counts.pool
              << " pool, " << counts.fc << " fc) -> " << out.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- embedding

struct TrainArgs {
    Common common;
    std::string store, protocol, out, loss_csv;
    int splits = 0;
    std::optional<int> epochs, dim, batch;
    std::optional<double> lr, margin;
    std::optional<std::size_t> triplets;
};

struct LabelledSet {
    Eigen::MatrixXd x;  // M×N, L2-normalized columns
    std::vector<int> labels;
};

LabelledSet labelled_descriptors(const DescriptorStore& store, const ProtocolTable& table) {
    std::map<std::string, int> subject_index;
    for (const auto& row : table.rows) subject_index.emplace(row.subject_id, 0);
    int next = 0;
    for (auto& [subject, idx] : subject_index) idx = next++;
    std::vector<const std::vector<double>*> cols;
    LabelledSet set;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        const auto* d = store.find(row.media_path);
        if (!d || !seen.insert(row.media_path).second) continue;
        cols.push_back(d);
        set.labels.push_back(subject_index.at(row.subject_id));
    }
    set.x.resize(static_cast<Eigen::Index>(store.dim()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(cols[j]->data(), static_cast<Eigen::Index>(cols[j]->size()));
        const double n = v.norm();
        if (n > 0.0) v /= n;
        set.x.col(static_cast<Eigen::Index>(j)) = v;
    }
    return set;
}

int cmd_train_embedding(const TrainArgs& a) {
    PipelineConfig cfg = configure(a.common);
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.dim) cfg.train.embedding_dim = *a.dim;
    if (a.batch) cfg.train.batch_size = *a.batch;
    if (a.lr) cfg.train.learning_rate = *a.lr;
    if (a.margin) cfg.train.margin = *a.margin;
    if (a.triplets) cfg.train.triplets_per_epoch = *a.triplets;
    const fs::path store_path = require_input(a.store, cfg.paths.store, "descriptor store");
    const fs::path protocol = require_input(a.protocol, cfg.paths.protocol, "protocol");
    const fs::path out = pick(a.out, cfg.paths.embedding, "output embedding");
    const DescriptorStore store = store_read(store_path);

    for (int split : split_range(a.splits)) {
        const fs::path train_csv = split_file(split_dir(protocol, split), "train.csv");
        if (!fs::exists(train_csv)) throw ConfigError("training protocol not found: " + train_csv.string());
        const LabelledSet set = labelled_descriptors(store, parse_protocol(train_csv));
        const TrainResult result = train_embedding(set.x, set.labels, cfg.train);
        const fs::path w_path = split == 0 ? out : out / ("split" + std::to_string(split)) / "embedding.tmpl";
        fs::path loss_path = split == 0 ? fs::path(a.loss_csv) : w_path.parent_path() / "loss.csv";
        if (loss_path.empty()) loss_path = fs::path(out.string() + ".loss.csv");
        save_embedding(w_path, result.embedding);
        std::string csv = "epoch,mean_loss\n";
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
            csv += std::to_string(e + 1) + "," + format_double(result.epoch_loss[e]) + "\n";
        }
        write_file_atomic(loss_path, csv);
        std::cout << "trained " << result.embedding.input_dim() << "x" << result.embedding.output_dim()
                  << " embedding on " << set.labels.size() << " descriptors over " << cfg.train.epochs
                  << " epochs -> " << w_path.string() << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    Common common;
    std::string protocol, store, embedding, policy, out;
    int splits = 0;
};

std::vector<Template> build_templates(const ProtocolTable& table, const DescriptorStore& store, std::size_t& missing) {
    std::vector<Template> out;
    for (const auto& tm : table.templates()) {
        Template t{tm.template_id, tm.subject_id, {}};
        for (const auto& m : tm.media) {
            if (const auto* d = store.find(m)) {
                t.media.push_back(Eigen::Map<const Eigen::VectorXd>(d->data(), static_cast<Eigen::Index>(d->size())));
            } else if (!store.contains(m)) {
                ++missing;
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

int cmd_eval(const EvalArgs& a) {
    PipelineConfig cfg = configure(a.common);
    if (!a.policy.empty()) {
        try {
            cfg.policy = parse_policy(a.policy);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    const fs::path protocol = require_input(a.protocol, cfg.paths.protocol, "protocol directory");
    const fs::path store_path = require_input(a.store, cfg.paths.store, "descriptor store");
    const fs::path out = pick(a.out, cfg.paths.out, "report directory");
    const fs::path embedding = a.embedding.empty() ? cfg.paths.embedding : fs::path(a.embedding);
    if (!embedding.empty() && !fs::exists(embedding)) throw ConfigError("embedding not found: " + embedding.string());
    const DescriptorStore store = store_read(store_path);

    std::vector<MetricMap> split_metrics;
    for (int split : split_range(a.splits)) {
        const fs::path dir = split_dir(protocol, split);
        const fs::path report_dir = split == 0 ? out : out / ("split" + std::to_string(split));
        const fs::path templates_csv = split_file(dir, "templates.csv");
        if (!fs::exists(templates_csv)) throw ConfigError("templates not found: " + templates_csv.string());
        const fs::path base = fs::is_directory(dir) ? dir : dir.parent_path();

        EmbeddingMatrix w{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(store.dim()),
                                                    static_cast<Eigen::Index>(store.dim()))};
        if (!embedding.empty()) {
            w = load_embedding(fs::is_directory(embedding) ? embedding / ("split" + std::to_string(split)) / "embedding.tmpl"
                                                           : embedding);
        }
        std::size_t missing = 0;
        const std::vector<Template> templates = build_templates(parse_protocol(templates_csv), store, missing);
        if (missing) log(std::to_string(missing) + " media absent from the store are treated as undetected");
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < templates.size(); ++i) index[templates[i].template_id] = i;
        auto lookup = [&](const std::string& id) {
            auto it = index.find(id);
            if (it == index.end()) raise(ErrorCode::ConsistencyError, "unknown template_id '" + id + "'");
            return it->second;
        };

        MetricMap metrics;
        bool evaluated = false;
        if (const fs::path pairs_csv = base / "pairs.csv"; fs::exists(pairs_csv)) {
            std::vector<VerificationPair> pairs;
            for (const auto& [x, y] : parse_pairs_text(read_file_text(pairs_csv))) {
                const std::size_t i = lookup(x), j = lookup(y);
                pairs.push_back({i, j, templates[i].subject_id == templates[j].subject_id});
            }
            const VerifReport r = eval_verification(templates, pairs, w, cfg.policy);
            check_report(r);
            std::string scores = "template_a,template_b,genuine,score\n";
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                scores += templates[pairs[k].a].template_id + "," + templates[pairs[k].b].template_id + "," +
                          (pairs[k].genuine ? "1," : "0,") +
                          (r.pair_scores[k] ? format_double(*r.pair_scores[k]) : std::string("skipped")) + "\n";
            }
            write_file_atomic(report_dir / "verification.json", to_json(r, cfg.policy).dump(2) + "\n");
            write_file_atomic(report_dir / "roc.csv", roc_csv(r));
            write_file_atomic(report_dir / "scores.csv", scores);
            const auto m = metrics_of(r);
            metrics.insert(m.begin(), m.end());
            evaluated = true;
        }
        if (const fs::path ident_csv = base / "ident.csv"; fs::exists(ident_csv)) {
            const IdentificationLists lists = parse_ident_text(read_file_text(ident_csv));
            std::vector<Template> probes, gallery;
            for (const auto& id : lists.probes) probes.push_back(templates[lookup(id)]);
            for (const auto& id : lists.gallery) gallery.push_back(templates[lookup(id)]);
            const IdentReport r = eval_identification(probes, gallery, w, cfg.policy);
            check_report(r, cfg.policy);
            std::string ranks = "template_id,rank\n";
            for (std::size_t k = 0; k < probes.size(); ++k) {
                ranks += probes[k].template_id + "," +
                         (r.probe_ranks[k] ? std::to_string(*r.probe_ranks[k]) : std::string("skipped")) + "\n";
            }
            write_file_atomic(report_dir / "identification.json", to_json(r, cfg.policy).dump(2) + "\n");
            write_file_atomic(report_dir / "cmc.csv", cmc_csv(r));
            write_file_atomic(report_dir / "ranks.csv", ranks);
            const auto m = metrics_of(r);
            metrics.insert(m.begin(), m.end());
            evaluated = true;
        }
        if (!evaluated) raise(ErrorCode::DegenerateProtocol, "no pairs.csv or ident.csv next to " + templates_csv.string());
        for (const auto& [k, v] : metrics) std::cout << (split ? "split" + std::to_string(split) + " " : "") << k << " = " << v << "\n";
        split_metrics.push_back(std::move(metrics));
    }
    if (a.splits > 0) {
        const SplitSummary summary = aggregate_splits(split_metrics);
        write_file_atomic(out / "summary.json", to_json(summary, cfg.policy).dump(2) + "\n");
        write_file_atomic(out / "summary.csv", summary_csv(summary));
        for (const auto& [k, mean] : summary.mean) std::cout << k << " mean " << mean << " std " << summary.stddev.at(k) << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------- landmarks

struct LandmarkArgs {
    Common common;
    std::string protocol, images, model, out;
    std::optional<int> stages, radius;
    std::optional<double> lambda;
};

int cmd_landmark_train(const LandmarkArgs& a) {
    PipelineConfig cfg = configure(a.common);
    if (a.stages) cfg.landmarks.stages = *a.stages;
    if (a.radius) cfg.landmarks.patch_radius = *a.radius;
    if (a.lambda) cfg.landmarks.ridge_lambda = *a.lambda;
    const fs::path protocol = require_input(a.protocol, cfg.paths.protocol, "protocol");
    const fs::path images = require_input(a.images, cfg.paths.images, "images directory");
    const fs::path out = pick(a.out, cfg.paths.out, "output model");
    const ProtocolTable table = parse_protocol(protocol);

    std::vector<LandmarkSample> samples;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        if (!row.landmarks || !seen.insert(row.media_path).second) continue;
        const fs::path img = images / row.media_path;
        if (!fs::exists(img)) continue;
        samples.push_back({read_pnm(img), Shape(row.landmarks->begin(), row.landmarks->end())});
    }
    const CascadeTrainResult result = cascade_train(samples, cfg.landmarks);
    for (std::size_t i = 1; i < result.stage_rms.size(); ++i) {
        if (result.stage_rms[i] > result.stage_rms[i - 1] + 1e-9) {
            throw InvariantViolation("training RMS increased at stage " + std::to_string(i));
        }
    }
    save_cascade(out, result.model);
    std::cout << "trained " << result.model.stages.size() << "-stage cascade on " << samples.size() << " images; rms";
    for (double r : result.stage_rms) std::cout << " " << r;
    std::cout << " -> " << out.string() << "\n";
    return kOk;
}

int cmd_landmark_predict(const LandmarkArgs& a) {
    const PipelineConfig cfg = configure(a.common);
    const fs::path protocol = require_input(a.protocol, cfg.paths.protocol, "protocol");
    const fs::path images = require_input(a.images, cfg.paths.images, "images directory");
    const fs::path model_path = require_input(a.model, {}, "cascade model");
    const fs::path out = pick(a.out, cfg.paths.out, "output protocol");
    const CascadeModel model = load_cascade(model_path);
    ProtocolTable table = parse_protocol(protocol);
    std::vector<std::optional<std::array<Point2, 3>>> predicted(table.rows.size());
    parallel_for(table.rows.size(), [&](std::size_t i) {
        const fs::path img = images / table.rows[i].media_path;
        if (!fs::exists(img)) return;
        const Shape s = cascade_predict(model, read_pnm(img));
        predicted[i] = std::array<Point2, 3>{s[0], s[1], s[2]};
    });
    std::size_t missing = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        table.rows[i].landmarks = predicted[i];
        missing += !predicted[i];
    }
    write_file_atomic(out, serialize_protocol(table));
    std::cout << "predicted landmarks for " << table.rows.size() - missing << " of " << table.rows.size()
              << " rows -> " << out.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
    Common common;
    std::string image, scorer, features, out;
    std::optional<double> iou, threshold;
};

FeatureFn feature_fn_named(const std::string& name) {
    if (name == "hog") return gradient_histogram_features;
    if (name == "identity") return identity_features;
    throw ConfigError("features must be hog or identity, got '" + name + "'");
}

int cmd_detect(const DetectArgs& a) {
    PipelineConfig cfg = configure(a.common);
    if (!a.features.empty()) cfg.detect.features = a.features;
    if (a.iou) cfg.detect.iou = *a.iou;
    if (a.threshold) cfg.detect.threshold = *a.threshold;
    if (!(cfg.detect.iou > 0.0 && cfg.detect.iou < 1.0)) throw ConfigError("iou threshold must be in (0,1)");
    const fs::path image = require_input(a.image, {}, "image");
    const fs::path scorer_path = require_input(a.scorer, {}, "scorer");
    const fs::path out = pick(a.out, cfg.paths.out, "output directory");
    const FeatureFn fn = feature_fn_named(cfg.detect.features);

    const LinearScorer scorer = load_scorer(scorer_path);
    const Image img = read_pnm(image);
    const FeaturePyramid pyramid = build_pyramid(img, fn, scorer.window);
    std::vector<DetBox> boxes;
    for (const auto& b : score_locations(pyramid, scorer)) {
        if (b.score >= cfg.detect.threshold) boxes.push_back(b);
    }
    const std::size_t candidates = boxes.size();
    const auto kept = nms(std::move(boxes), cfg.detect.iou);

    std::string csv = "x,y,w,h,score,level\n";
    for (const auto& b : kept) {
        csv += format_double(b.x) + "," + format_double(b.y) + "," + format_double(b.w) + "," + format_double(b.h) +
               "," + format_double(b.score) + "," + std::to_string(b.level) + "\n";
    }
    json levels = json::array();
    for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
        levels.push_back({{"level", l},
                          {"height", pyramid.levels[l].height()},
                          {"width", pyramid.levels[l].width()},
                          {"channels", pyramid.levels[l].channels()},
                          {"scale", pyramid.scale_factors[l]}});
    }
    const json summary = {{"levels", levels}, {"candidates", candidates}, {"detections", kept.size()}};
    write_file_atomic(out / "detections.csv", csv);
    write_file_atomic(out / "pyramid.json", summary.dump(2) + "\n");
    std::cout << pyramid.levels.size() << " pyramid levels, " << candidates << " candidates, " << kept.size()
              << " detections after NMS -> " << out.string() << "\n";
    return kOk;
}

struct InitScorerArgs {
    Common common;
    std::string features, out;
    int window = 0;
    int channels = 0;
};

int cmd_init_scorer(const InitScorerArgs& a) {
    const PipelineConfig cfg = configure(a.common);
    const int window = a.window > 0 ? a.window : cfg.detect.window;
    const std::string features = a.features.empty() ? cfg.detect.features : a.features;
    int channels = a.channels;
    if (channels <= 0) channels = features == "hog" ? 9 : 3;
    const fs::path out = pick(a.out, cfg.paths.out, "output scorer");
    Rng rng(cfg.seed);
    LinearScorer s{window, channels, {}, 0.0};
    s.weights.resize(static_cast<std::size_t>(window) * window * channels);
    for (double& v : s.weights) v = rng.normal() / std::sqrt(static_cast<double>(s.weights.size()));
    save_scorer(out, s);
    std::cout << "wrote " << window << "x" << window << "x" << channels << " scorer -> " << out.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    Common common;
    SynthOptions options;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    const PipelineConfig cfg = configure(a.common);
    SynthOptions o = a.options;
    o.seed = cfg.seed;
    const fs::path out = pick(a.out, cfg.paths.out, "output directory");
    try {
        write_synthetic_dataset(out, o);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) throw ConfigError(e.what());
        throw;
    }
    std::cout << "wrote synthetic dataset (" << o.subjects << " subjects, " << o.splits << " splits) -> " << out.string()
              << "\n";
    return kOk;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"templar: template-based face verification pipeline"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    AlignArgs align;
    auto* s_align = app.add_subcommand("align", "Align faces into the canonical 100x100 frame");
    add_common(s_align, align.common);
    s_align->add_option("--protocol", align.protocol, "Protocol CSV with landmarks");
    s_align->add_option("--images", align.images, "Directory holding the media files");
    s_align->add_option("--out", align.out, "Output aligned-face store");

    ExtractArgs extract;
    auto* s_extract = app.add_subcommand("extract", "Run the descriptor network over an aligned store");
    add_common(s_extract, extract.common);
    s_extract->add_option("--netspec", extract.netspec, "Layer file (defaults to the config / reference net)");
    s_extract->add_option("--weights", extract.weights, "Network weights container");
    s_extract->add_option("--store", extract.store, "Aligned-face store");
    s_extract->add_option("--out", extract.out, "Output descriptor store");

    InitWeightsArgs initw;
    auto* s_initw = app.add_subcommand("init-weights", "Write seeded random (or zero) network weights");
    add_common(s_initw, initw.common);
    s_initw->add_option("--netspec", initw.netspec, "Layer file");
    s_initw->add_flag("--zero", initw.zero, "All-zero weights");
    s_initw->add_option("--out", initw.out, "Output weights container");

    TrainArgs train;
    auto* s_train = app.add_subcommand("train-embedding", "Learn the triplet embedding matrix");
    add_common(s_train, train.common);
    s_train->add_option("--store", train.store, "Descriptor store");
    s_train->add_option("--protocol", train.protocol, "Split directory (train.csv) or training protocol CSV");
    s_train->add_option("--out", train.out, "Output embedding (a directory when --splits is given)");
    s_train->add_option("--loss-csv", train.loss_csv, "Loss trace CSV (default <out>.loss.csv)");
    s_train->add_option("--splits", train.splits, "Iterate split1..splitN under --protocol");
    s_train->add_option("--epochs", train.epochs);
    s_train->add_option("--dim", train.dim, "Embedding dimension");
    s_train->add_option("--batch", train.batch);
    s_train->add_option("--lr", train.lr);
    s_train->add_option("--margin", train.margin);
    s_train->add_option("--triplets", train.triplets, "Triplets sampled per epoch");

    EvalArgs eval;
    auto* s_eval = app.add_subcommand("eval", "Verification ROC and identification CMC over templates");
    add_common(s_eval, eval.common);
    s_eval->add_option("--protocol", eval.protocol, "Split directory with templates.csv, pairs.csv, ident.csv");
    s_eval->add_option("--store", eval.store, "Descriptor store");
    s_eval->add_option("--embedding", eval.embedding, "Embedding container (directory of splits with --splits)");
    s_eval->add_option("--policy", eval.policy, "setup1 | setup2");
    s_eval->add_option("--out", eval.out, "Report directory");
    s_eval->add_option("--splits", eval.splits, "Iterate split1..splitN and aggregate");

    LandmarkArgs lm_train, lm_predict;
    auto* s_lm = app.add_subcommand("landmark", "Cascade landmark regression");
    s_lm->require_subcommand(1);
    auto* s_lm_train = s_lm->add_subcommand("train", "Train a cascade from annotated media");
    add_common(s_lm_train, lm_train.common);
    s_lm_train->add_option("--protocol", lm_train.protocol, "Protocol CSV with landmarks");
    s_lm_train->add_option("--images", lm_train.images, "Directory holding the media files");
    s_lm_train->add_option("--out", lm_train.out, "Output cascade model");
    s_lm_train->add_option("--stages", lm_train.stages);
    s_lm_train->add_option("--radius", lm_train.radius, "Patch radius in pixels");
    s_lm_train->add_option("--lambda", lm_train.lambda, "Ridge regularization");
    auto* s_lm_predict = s_lm->add_subcommand("predict", "Fill protocol landmarks from a cascade");
    add_common(s_lm_predict, lm_predict.common);
    s_lm_predict->add_option("--model", lm_predict.model, "Cascade model");
    s_lm_predict->add_option("--protocol", lm_predict.protocol, "Protocol CSV");
    s_lm_predict->add_option("--images", lm_predict.images, "Directory holding the media files");
    s_lm_predict->add_option("--out", lm_predict.out, "Output protocol CSV");

    DetectArgs detect;
    auto* s_detect = app.add_subcommand("detect", "Pyramid window scoring with non-maximum suppression");
    add_common(s_detect, detect.common);
    s_detect->add_option("--image", detect.image, "PGM/PPM image");
    s_detect->add_option("--scorer", detect.scorer, "Linear scorer container");
    s_detect->add_option("--features", detect.features, "hog | identity");
    s_detect->add_option("--iou", detect.iou, "NMS IoU threshold");
    s_detect->add_option("--threshold", detect.threshold, "Minimum window score");
    s_detect->add_option("--out", detect.out, "Output directory");

    InitScorerArgs inits;
    auto* s_inits = app.add_subcommand("init-scorer", "Write a seeded random linear scorer");
    add_common(s_inits, inits.common);
    s_inits->add_option("--window", inits.window);
    s_inits->add_option("--channels", inits.channels);
    s_inits->add_option("--features", inits.features, "hog | identity (sets the default channel count)");
    s_inits->add_option("--out", inits.out, "Output scorer container");

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic identity dataset");
    add_common(s_synth, synth.common);
    s_synth->add_option("--out", synth.out, "Output directory");
    s_synth->add_option("--subjects", synth.options.subjects);
    s_synth->add_option("--templates", synth.options.templates_per_subject, "Templates per subject");
    s_synth->add_option("--media", synth.options.media_per_template, "Media per template");
    s_synth->add_option("--splits", synth.options.splits);
    s_synth->add_option("--fail-rate", synth.options.fail_rate, "Fraction of templates with no detectable media");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (s_align->parsed()) return cmd_align(align);
        if (s_extract->parsed()) return cmd_extract(extract);
        if (s_initw->parsed()) return cmd_init_weights(initw);
        if (s_train->parsed()) return cmd_train_embedding(train);
        if (s_eval->parsed()) return cmd_eval(eval);
        if (s_lm_train->parsed()) return cmd_landmark_train(lm_train);
        if (s_lm_predict->parsed()) return cmd_landmark_predict(lm_predict);
        if (s_detect->parsed()) return cmd_detect(detect);
        if (s_inits->parsed()) return cmd_init_scorer(inits);
        if (s_synth->parsed()) return cmd_synth(synth);
    } catch (const ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return kUsage;
    } catch (const InvariantViolation& e) {
        log(std::string("invariant violated: ") + e.what());
        return kInvariant;
    } catch (const Error& e) {
        log(e.what());
        return e.code() == ErrorCode::InvalidArgument ? kUsage : kDataError;
    } catch (const std::exception& e) {
        log(std::string("internal error: ") + e.what());
        return kInvariant;
    }
    return kUsage;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    copy.insert(copy.begin(), "templar");
    std::vector<char*> argv;
    for (auto& s : copy) argv.push_back(s.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace templar::cli
