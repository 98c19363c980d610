#pragma once

#include "polarlens/gam.hpp"
#include "polarlens/toml_lite.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace polarlens {

/// Flat pipeline configuration resolved from a TOML table. Relative input
/// paths are resolved against the config file's directory; outputs against
/// out_dir.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    std::string tweets_path;
    std::string users_path;
    std::string follows_path;
    std::string elites_path;
    std::string embeddings_path;      // empty: fetch from the embedding provider
    std::string scorer_lexicon_path;  // stub scorer lexicon
    std::string perturbations_path;   // optional, unused by the stages
    std::vector<std::string> lang_allow; // empty: accept every language

    std::string provider_mode = "stub"; // "stub" or "http"
    std::size_t embedding_dim = 64;
    std::string scorer_host = "127.0.0.1";
    int scorer_port = 0;
    std::string embedder_host = "127.0.0.1";
    int embedder_port = 0;
    std::size_t provider_batch = 64;
    std::size_t provider_concurrency = 4;

    std::optional<int> first_month; // month index; absent: derived from the corpus
    int n_months = 0;               // 0: derived from the corpus

    int ca_dims = 1;
    std::string anchor;
    std::size_t min_follows = 10;
    double top_pct = 0.2;
    std::int64_t min_elite_followers = 30;
    std::size_t expand_top_n = 10;

    double lambda_dist = 0.40;
    double min_assign_sim = 0.60;
    std::size_t cluster_batch_size = 4096;
    std::size_t cluster_max_iter = 100;
    bool spawn_per_batch = false;

    double pmi_alpha = 1.0;
    std::size_t top_k = 10;
    std::size_t min_topic_size = 50;
    double wave_majority = 0.5;

    bool restrict_to_known = true;
    bool graph_directed = true;
    bool graph_weighted = true;

    GamConfig gam;
    double val_frac = 0.1;
    std::size_t importance_repeats = 10;

    /// Sorted key=value flattening of the source table; hashing input.
    std::string canonical;
    /// FNV-1a of canonical + seed, reproduced in every report.
    std::string run_hash() const;
};

PipelineConfig config_from_table(const TomlTable& table, const std::string& config_dir);
PipelineConfig load_pipeline_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {});

enum class Stage { ingest, score, ideology, cluster, topics, graph, gam, report };

const char* stage_name(Stage s);
std::vector<Stage> all_stages();

struct StageRun {
    Stage stage;
    bool skipped = false;
    double seconds = 0.0;
};

/// Runs the requested stages in order. With resume, a stage whose output
/// files already exist is skipped. Stages communicate only through files
/// under out_dir, so a resumed run reproduces an uninterrupted one.
/// Returns the per-stage timings and writes manifest.json (the only output
/// containing wall-clock timestamps).
std::vector<StageRun> run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages,
                                   bool resume);

} // namespace polarlens
