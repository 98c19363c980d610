#include "polarlens/pipeline.hpp"

#include "polarlens/common.hpp"
#include "polarlens/synth.hpp"
#include "polarlens/toml_lite.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace polarlens;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct PipeTempDir {
    fs::path path;
    PipeTempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("polarlens_pipe_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~PipeTempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        auto p = path / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p.string();
    }
};

const char* kMinimalConfig = R"([inputs]
tweets = "tweets.jsonl"
users = "users.csv"
follows = "follows.csv"
elites = "elites.txt"

[ideology]
anchor = "e_r_01"
)";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Relative path -> content for every regular file under root, except the
// manifest (it carries wall-clock timestamps by design).
std::map<std::string, std::string> tree_snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        if (rel == "manifest.json") continue;
        out[rel] = read_file(e.path());
    }
    return out;
}

} // namespace

TEST_CASE("pipeline config applies documented defaults and resolves paths") {
    auto table = TomlTable::parse_string(kMinimalConfig);
    auto cfg = config_from_table(table, "/data/run");

    CHECK(cfg.seed == 0);
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.tweets_path == "/data/run/tweets.jsonl");
    CHECK(cfg.users_path == "/data/run/users.csv");
    CHECK(cfg.follows_path == "/data/run/follows.csv");
    CHECK(cfg.elites_path == "/data/run/elites.txt");
    CHECK(cfg.embeddings_path.empty());
    CHECK(cfg.lang_allow.empty());
    CHECK(cfg.provider_mode == "stub");
    CHECK(cfg.embedding_dim == 64);
    CHECK(cfg.ca_dims == 1);
    CHECK(cfg.anchor == "e_r_01");
    CHECK(cfg.min_follows == 10);
    CHECK(cfg.top_pct == 0.2);
    CHECK(cfg.min_elite_followers == 30);
    CHECK(cfg.lambda_dist == 0.40);
    CHECK(cfg.min_assign_sim == 0.60);
    CHECK(cfg.pmi_alpha == 1.0);
    CHECK(cfg.top_k == 10);
    CHECK(cfg.min_topic_size == 50);
    CHECK(cfg.wave_majority == 0.5);
    CHECK(cfg.restrict_to_known);
    CHECK(cfg.graph_directed);
    CHECK(cfg.graph_weighted);
    CHECK(cfg.gam.degree == 3);
    CHECK(cfg.gam.n_basis == 20);
    CHECK(cfg.gam.min_rows == 50);
    CHECK(cfg.val_frac == 0.1);
    CHECK(cfg.importance_repeats == 10);
    CHECK(!cfg.first_month);

    // Absolute inputs pass through untouched.
    auto abs_table = TomlTable::parse_string(kMinimalConfig);
    abs_table.set_override("inputs.tweets", "\"/abs/t.jsonl\"");
    CHECK(config_from_table(abs_table, "/data/run").tweets_path == "/abs/t.jsonl");
}

TEST_CASE("pipeline config reports every missing required key at once") {
    auto table = TomlTable::parse_string("seed = 1\n");
    try {
        (void)config_from_table(table, "");
        FAIL("expected config_error");
    } catch (const config_error& ex) {
        std::string msg = ex.what();
        for (const char* key : {"inputs.tweets", "inputs.users", "inputs.follows",
                                "inputs.elites", "ideology.anchor"}) {
            CAPTURE(key);
            CHECK(msg.find(key) != std::string::npos);
        }
    }
}

TEST_CASE("pipeline config rejects out-of-range values") {
    auto with = [&](const std::string& key, const std::string& raw) {
        auto table = TomlTable::parse_string(kMinimalConfig);
        table.set_override(key, raw);
        return table;
    };
    CHECK_THROWS_AS((void)config_from_table(with("seed", "-1"), ""), config_error);
    CHECK_THROWS_AS((void)config_from_table(with("providers.mode", "\"grpc\""), ""), config_error);
    CHECK_THROWS_AS((void)config_from_table(with("providers.embedding_dim", "0"), ""),
                    config_error);
    CHECK_THROWS_AS((void)config_from_table(with("ideology.dims", "0"), ""), config_error);
    CHECK_THROWS_AS((void)config_from_table(with("gam.val_frac", "1.0"), ""), config_error);
    CHECK_THROWS_AS((void)config_from_table(with("window.first_month", "\"2022-01\""), ""),
                    config_error); // n_months missing
    auto table = TomlTable::parse_string(kMinimalConfig);
    table.set_override("window.first_month", "\"2022-01\"");
    table.set_override("window.n_months", "0");
    CHECK_THROWS_AS((void)config_from_table(table, ""), config_error);
}

TEST_CASE("config overrides use the TOML value grammar") {
    PipeTempDir dir;
    auto path = dir.file("config.toml", kMinimalConfig);

    auto cfg = load_pipeline_config(
        path, {"seed=7", "cluster.lambda_dist=0.25", "inputs.tweets=\"other.jsonl\""});
    CHECK(cfg.seed == 7);
    CHECK(cfg.lambda_dist == 0.25);
    CHECK(cfg.tweets_path == (dir.path / "other.jsonl").string());

    CHECK_THROWS_AS((void)load_pipeline_config(path, {"no-equals-sign"}), config_error);
    CHECK_THROWS_AS((void)load_pipeline_config(path, {"=value"}), config_error);
}

TEST_CASE("run hash tracks the analysis config but not the output directory") {
    PipeTempDir dir;
    auto path = dir.file("config.toml", kMinimalConfig);

    auto base = load_pipeline_config(path);
    CHECK(load_pipeline_config(path).run_hash() == base.run_hash());

    // Key order in the file does not matter; the canonical form is sorted.
    auto reordered = dir.file("reordered.toml", R"([ideology]
anchor = "e_r_01"

[inputs]
elites = "elites.txt"
follows = "follows.csv"
users = "users.csv"
tweets = "tweets.jsonl"
)");
    CHECK(load_pipeline_config(reordered).canonical == base.canonical);
    CHECK(load_pipeline_config(reordered).run_hash() == base.run_hash());

    CHECK(load_pipeline_config(path, {"out_dir=\"elsewhere\""}).run_hash() == base.run_hash());
    CHECK(load_pipeline_config(path, {"seed=9"}).run_hash() != base.run_hash());
    CHECK(load_pipeline_config(path, {"cluster.lambda_dist=0.31"}).run_hash() !=
          base.run_hash());
}

TEST_CASE("pipeline runs end to end, reruns byte-identically and resumes") {
    PipeTempDir corpus;
    SynthParams params;
    params.n_users = 80;
    params.elites_per_side = 6;
    params.candidates_per_side = 3;
    params.n_tweets = 600;
    params.n_topics = 3;
    params.n_wave_topics = 1;
    params.embedding_dim = 16;
    params.n_months = 6;
    params.seed = 91;
    gen_synthetic(params, corpus.path.string());

    PipeTempDir out1, out2;
    auto config_path = (corpus.path / "config.toml").string();
    std::vector<std::string> overrides = {
        "ideology.min_follows=3", // small bloc, keep most users scored
        "topics.min_topic_size=30",
        "gam.min_rows=12",
    };
    auto with_out = [&](const fs::path& out) {
        auto ov = overrides;
        ov.push_back("out_dir=\"" + out.generic_string() + "\"");
        return load_pipeline_config(config_path, ov);
    };

    auto cfg1 = with_out(out1.path / "run");
    auto runs = run_pipeline(cfg1, all_stages(), false);
    REQUIRE(runs.size() == 8);
    for (const auto& r : runs) {
        CAPTURE(stage_name(r.stage));
        CHECK(!r.skipped);
    }

    fs::path root1 = out1.path / "run";
    REQUIRE(fs::exists(root1 / "manifest.json"));
    json summary = json::parse(read_file(root1 / "report" / "summary.json"));
    CHECK(summary["schema"] == "polarlens/1");
    CHECK(summary["run_hash"] == cfg1.run_hash());
    CHECK(summary["corpus"]["n_tweets"] == 600);
    CHECK(summary["clusters"]["counts"].size() >= 1);
    CHECK(summary["topics"]["k_total"].get<int>() >= 1);
    CHECK(summary["waves"]["n"].get<int>() >= 1);

    // Both GAM reports ran on real tables rather than bailing out.
    json user_sel = json::parse(read_file(root1 / "gam" / "user_selection.json"));
    json topic_sel = json::parse(read_file(root1 / "gam" / "topic_selection.json"));
    CHECK(!user_sel.contains("error"));
    CHECK(!topic_sel.contains("error"));
    CHECK(user_sel["n_rows"].get<int>() >= 12);
    CHECK(topic_sel["n_rows"].get<int>() >= 12);

    // Same analysis into a different directory: identical run hash and bytes.
    auto cfg2 = with_out(out2.path / "run");
    CHECK(cfg2.run_hash() == cfg1.run_hash());
    run_pipeline(cfg2, all_stages(), false);
    auto snap1 = tree_snapshot(root1);
    auto snap2 = tree_snapshot(out2.path / "run");
    REQUIRE(!snap1.empty());
    CHECK(snap1.size() == snap2.size());
    for (const auto& [rel, bytes] : snap1) {
        CAPTURE(rel);
        REQUIRE(snap2.count(rel) == 1);
        CHECK(bytes == snap2.at(rel));
    }

    // Resume recomputes only what is missing and reproduces the same bytes.
    fs::remove(root1 / "report" / "summary.json");
    auto resumed = run_pipeline(cfg1, all_stages(), true);
    REQUIRE(resumed.size() == 8);
    for (std::size_t i = 0; i + 1 < resumed.size(); ++i) CHECK(resumed[i].skipped);
    CHECK(!resumed.back().skipped);
    CHECK(read_file(root1 / "report" / "summary.json") ==
          snap1.at("report/summary.json"));
}
