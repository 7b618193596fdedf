#include <cstdlib>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oracles.hpp"
#include "templar/atomic_file.hpp"
#include "templar/descriptor_store.hpp"
#include "templar/embed_train.hpp"
#include "templar/geom_align.hpp"
#include "templar/pnm.hpp"
#include "templar/protocol.hpp"

namespace fs = std::filesystem;
using namespace templar;

namespace {

const char* kToyNet = "input 100 100 3\nconv 4 5 4 0\nrelu\nmaxpool 2 2\nfc 16\n";

int run_cli(const std::string& args, const fs::path& log = {}) {
    std::string cmd = std::string(TEMPLAR_BIN) + " " + args;
    cmd += log.empty() ? " > /dev/null 2>&1" : " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = oracle::temp_dir("cli");
        write_file_atomic(root_ / "toy.net", std::string_view(kToyNet));
        ASSERT_EQ(run_cli("synth --seed 5 --subjects 12 --splits 2 --fail-rate 0.15 --out " + q(root_ / "ds")), 0);
    }
    static fs::path root_;

    // Runs the full chain into `out` and returns its directory.
    static fs::path full_run(const std::string& tag, const std::string& policy = "setup2") {
        const fs::path out = root_ / tag;
        const fs::path ds = root_ / "ds";
        EXPECT_EQ(run_cli("align --protocol " + q(ds / "protocol.csv") + " --images " + q(ds / "images") + " --out " +
                          q(out / "aligned.tmpl")), 0);
        EXPECT_EQ(run_cli("init-weights --seed 9 --netspec " + q(root_ / "toy.net") + " --out " + q(out / "w.tmpl")), 0);
        EXPECT_EQ(run_cli("extract --netspec " + q(root_ / "toy.net") + " --weights " + q(out / "w.tmpl") + " --store " +
                          q(out / "aligned.tmpl") + " --out " + q(out / "desc.tmpl")), 0);
        EXPECT_EQ(run_cli("train-embedding --seed 9 --store " + q(out / "desc.tmpl") + " --protocol " + q(ds) +
                          " --splits 2 --dim 8 --epochs 3 --triplets 400 --out " + q(out / "emb")), 0);
        EXPECT_EQ(run_cli("eval --policy " + policy + " --protocol " + q(ds) + " --store " + q(out / "desc.tmpl") +
                          " --embedding " + q(out / "emb") + " --splits 2 --out " + q(out / "reports")), 0);
        return out;
    }
};

fs::path Pipeline::root_;

std::vector<fs::path> files_under(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_F(Pipeline, RerunIsBitIdentical) {
    const fs::path a = full_run("run_a");
    const fs::path b = full_run("run_b");
    const auto fa = files_under(a), fb = files_under(b);
    ASSERT_EQ(fa, fb);
    for (const auto& f : fa) EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(b / f)) << f;
    for (const char* f : {"reports/summary.json", "reports/summary.csv", "reports/split1/roc.csv",
                          "reports/split2/cmc.csv", "emb/split1/embedding.tmpl", "emb/split2/loss.csv"})
        EXPECT_TRUE(fs::exists(a / f)) << f;
    const auto summary = nlohmann::json::parse(read_file_text(a / "reports/summary.json"));
    EXPECT_EQ(summary.at("policy"), "setup2");
    // Threads do not change the outputs.
    setenv("TEMPLAR_THREADS", "3", 1);
    const fs::path c = full_run("run_c");
    unsetenv("TEMPLAR_THREADS");
    for (const auto& f : fa) EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(c / f)) << f;
}

TEST_F(Pipeline, FailedMediaAreMarkedNotFatal) {
    const fs::path out = full_run("run_fail");
    const auto store = store_read(out / "aligned.tmpl");
    EXPECT_LT(store.processable_count(), store.size());
    const auto table = parse_protocol(root_ / "ds" / "protocol.csv");
    EXPECT_EQ(store.size(), table.rows.size());
    EXPECT_EQ(store.dim(), 30000u);
}

TEST_F(Pipeline, Setup2ScoresAndRanksAffectedComparisons) {
    const fs::path out = full_run("run_policy");
    const auto scores = read_file_text(out / "reports/split1/scores.csv");
    const auto desc = store_read(out / "desc.tmpl");
    const auto table = parse_protocol(root_ / "ds" / "split1" / "templates.csv");
    std::set<std::string> dead;
    for (const auto& t : table.templates()) {
        bool any = false;
        for (const auto& m : t.media) any |= desc.find(m) != nullptr;
        if (!any) dead.insert(t.template_id);
    }
    std::istringstream in(scores);
    std::string line;
    std::getline(in, line);
    int affected = 0;
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        if (dead.count(std::string(f[0])) || dead.count(std::string(f[1]))) {
            EXPECT_EQ(f[3], "-1");
            ++affected;
        }
    }
    const auto ident = nlohmann::json::parse(read_file_text(out / "reports/split1/identification.json"));
    const std::size_t gallery = ident.at("gallery_size");
    std::istringstream ranks(read_file_text(out / "reports/split1/ranks.csv"));
    std::getline(ranks, line);
    while (std::getline(ranks, line)) {
        const auto f = split_csv_line(line);
        if (dead.count(std::string(f[0]))) EXPECT_EQ(std::stoul(std::string(f[1])), gallery);
    }
    (void)affected;
}

TEST_F(Pipeline, PoliciesAgreeWithoutFailures) {
    const fs::path ds = root_ / "clean";
    ASSERT_EQ(run_cli("synth --seed 6 --subjects 8 --splits 1 --out " + q(ds)), 0);
    ASSERT_EQ(run_cli("align --protocol " + q(ds / "protocol.csv") + " --images " + q(ds / "images") + " --out " + q(ds / "a.tmpl")), 0);
    ASSERT_EQ(run_cli("init-weights --netspec " + q(root_ / "toy.net") + " --out " + q(ds / "w.tmpl")), 0);
    ASSERT_EQ(run_cli("extract --netspec " + q(root_ / "toy.net") + " --weights " + q(ds / "w.tmpl") + " --store " + q(ds / "a.tmpl") + " --out " + q(ds / "d.tmpl")), 0);
    for (const char* p : {"setup1", "setup2"})
        ASSERT_EQ(run_cli(std::string("eval --policy ") + p + " --protocol " + q(ds / "split1") + " --store " + q(ds / "d.tmpl") + " --out " + q(ds / p)), 0);
    for (const char* f : {"roc.csv", "cmc.csv", "scores.csv", "ranks.csv"})
        EXPECT_EQ(read_file_text(ds / "setup1" / f), read_file_text(ds / "setup2" / f)) << f;
}

TEST_F(Pipeline, ZeroWeightsGiveZeroStore) {
    const fs::path out = root_ / "zero";
    ASSERT_EQ(run_cli("align --protocol " + q(root_ / "ds" / "protocol.csv") + " --images " + q(root_ / "ds" / "images") + " --out " + q(out / "a.tmpl")), 0);
    ASSERT_EQ(run_cli("init-weights --zero --netspec " + q(root_ / "toy.net") + " --out " + q(out / "w.tmpl")), 0);
    ASSERT_EQ(run_cli("extract --netspec " + q(root_ / "toy.net") + " --weights " + q(out / "w.tmpl") + " --store " + q(out / "a.tmpl") + " --out " + q(out / "d.tmpl")), 0);
    const auto store = store_read(out / "d.tmpl");
    EXPECT_EQ(store.dim(), 16u);
    for (const auto& [id, v] : store.entries())
        if (v)
            for (double x : *v) EXPECT_EQ(x, 0.0);
}

TEST_F(Pipeline, ZeroEpochsWritesInitialization) {
    const fs::path out = full_run("run_init");
    ASSERT_EQ(run_cli("train-embedding --seed 21 --epochs 0 --dim 8 --store " + q(out / "desc.tmpl") + " --protocol " +
                      q(root_ / "ds" / "split1" / "train.csv") + " --out " + q(out / "e0.tmpl")), 0);
    EXPECT_TRUE(load_embedding(out / "e0.tmpl").w == initial_embedding(16, 8, 21).w);
    EXPECT_EQ(read_file_text(fs::path(out.string() + "/e0.tmpl.loss.csv")), "epoch,mean_loss\n");
}

TEST_F(Pipeline, ExitCodes) {
    const fs::path ds = root_ / "ds";
    const fs::path log = root_ / "log.txt";
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("align --protocol " + q(root_ / "missing.csv") + " --images " + q(ds) + " --out " + q(root_ / "x")), 1);
    EXPECT_EQ(run_cli("eval --policy setup9 --protocol " + q(ds / "split1") + " --store " + q(ds / "protocol.csv") + " --out " + q(root_ / "x")), 1);
    EXPECT_EQ(run_cli("align --config " + q(root_ / "nope.json") + " --protocol " + q(ds / "protocol.csv")), 1);

    // Corrupt store → data error.
    const fs::path out = full_run("run_codes");
    auto bytes = read_file_bytes(out / "desc.tmpl");
    bytes[bytes.size() - 20] ^= 0xff;
    write_file_atomic(root_ / "corrupt.tmpl", bytes);
    EXPECT_EQ(run_cli("eval --protocol " + q(ds / "split1") + " --store " + q(root_ / "corrupt.tmpl") + " --out " + q(root_ / "x"), log), 2);
    EXPECT_NE(read_file_text(log).find("CorruptPayload"), std::string::npos);

    // A layer that cannot be applied is named.
    write_file_atomic(root_ / "bad.net", std::string_view("input 100 100 3\nconv 4 3 1 1\nmaxpool 2 2\nconv 2 80 1 0\nfc 3\n"));
    ASSERT_EQ(run_cli("init-weights --netspec " + q(root_ / "toy.net") + " --out " + q(root_ / "w.tmpl")), 0);
    EXPECT_EQ(run_cli("extract --netspec " + q(root_ / "bad.net") + " --weights " + q(root_ / "w.tmpl") + " --store " +
                      q(out / "aligned.tmpl") + " --out " + q(root_ / "x.tmpl"), log), 2);
    const auto msg = read_file_text(log);
    EXPECT_NE(msg.find("ShapeMismatch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("layer 2"), std::string::npos) << msg;

    // Single-subject training set → InsufficientClasses.
    write_file_atomic(root_ / "one.csv", std::string_view("template_id,subject_id,media_path\ns0_t0,s0,s0_t0_m0.ppm\ns0_t0,s0,s0_t0_m1.ppm\n"));
    EXPECT_EQ(run_cli("train-embedding --store " + q(out / "desc.tmpl") + " --protocol " + q(root_ / "one.csv") + " --out " + q(root_ / "e.tmpl"), log), 2);
    EXPECT_NE(read_file_text(log).find("InsufficientClasses"), std::string::npos);

    // Pairs with one class only → DegenerateProtocol.
    const fs::path deg = root_ / "deg";
    write_file_atomic(deg / "templates.csv", read_file_text(ds / "split1" / "templates.csv"));
    const auto first = parse_protocol(ds / "split1" / "templates.csv").templates();
    write_file_atomic(deg / "pairs.csv", "template_a,template_b\n" + first[0].template_id + "," + first[0].template_id + "\n");
    EXPECT_EQ(run_cli("eval --protocol " + q(deg) + " --store " + q(out / "desc.tmpl") + " --out " + q(root_ / "x"), log), 2);
    EXPECT_NE(read_file_text(log).find("DegenerateProtocol"), std::string::npos);
}

TEST_F(Pipeline, AlignAtCanonicalReproducesInput) {
    const fs::path dir = root_ / "canon";
    Image img(100, 100, 3);
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = ((x * 3 + y * 5 + c * 70) % 256) / 255.0;
    write_pnm(dir / "face.ppm", img);
    ProtocolTable t;
    t.rows.push_back({"T", "S", "face.ppm", std::array<Point2, 3>{kDefaultCanonical[0], kDefaultCanonical[1], kDefaultCanonical[2]}});
    write_file_atomic(dir / "p.csv", serialize_protocol(t));
    ASSERT_EQ(run_cli("align --protocol " + q(dir / "p.csv") + " --images " + q(dir) + " --out " + q(dir / "a.tmpl")), 0);
    const auto store = store_read(dir / "a.tmpl");
    const auto* v = store.find("face.ppm");
    ASSERT_NE(v, nullptr);
    for (std::size_t i = 0; i < v->size(); ++i) EXPECT_NEAR((*v)[i], img.values()[i], 1e-6);
}

TEST_F(Pipeline, LandmarksAndDetection) {
    const fs::path ds = root_ / "ds";
    const fs::path out = root_ / "lm";
    ASSERT_EQ(run_cli("landmark train --stages 0 --protocol " + q(ds / "protocol.csv") + " --images " + q(ds / "images") + " --out " + q(out / "m0.tmpl")), 0);
    ASSERT_EQ(run_cli("landmark predict --model " + q(out / "m0.tmpl") + " --protocol " + q(ds / "protocol.csv") + " --images " + q(ds / "images") + " --out " + q(out / "p0.csv")), 0);
    const auto pred = parse_protocol(out / "p0.csv");
    std::optional<std::array<Point2, 3>> first;
    for (const auto& r : pred.rows) {
        if (!r.landmarks) continue;
        if (!first) first = r.landmarks;
        EXPECT_EQ(*r.landmarks, *first);
    }
    ASSERT_EQ(run_cli("landmark train --protocol " + q(ds / "protocol.csv") + " --images " + q(ds / "images") + " --out " + q(out / "m.tmpl")), 0);
    ASSERT_EQ(run_cli("landmark predict --model " + q(out / "m.tmpl") + " --protocol " + q(ds / "protocol.csv") + " --images " + q(ds / "images") + " --out " + q(out / "p.csv")), 0);

    ASSERT_EQ(run_cli("init-scorer --seed 3 --window 6 --out " + q(out / "s.tmpl")), 0);
    ASSERT_EQ(run_cli("detect --scorer " + q(out / "s.tmpl") + " --image " + q(ds / "images" / "s0_t0_m0.ppm") + " --out " + q(out / "det")), 0);
    const auto pj = nlohmann::json::parse(read_file_text(out / "det" / "pyramid.json"));
    ASSERT_EQ(pj.at("levels").size(), 7u);
    EXPECT_EQ(pj.at("levels")[0].at("height"), 128);
    EXPECT_EQ(pj.at("levels")[6].at("height"), 16);
    EXPECT_EQ(run_cli("detect --iou 1.5 --scorer " + q(out / "s.tmpl") + " --image " + q(ds / "images" / "s0_t0_m0.ppm") + " --out " + q(out / "det")), 1);
}
