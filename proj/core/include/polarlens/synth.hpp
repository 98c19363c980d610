#pragma once

#include "polarlens/embedding.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace polarlens {

/// Two political blocs following bloc-aligned elite accounts.
struct TwoBlocFollows {
    std::vector<std::string> users;
    std::vector<bool> user_is_right;
    std::vector<std::string> elites; // right side first, then left
    std::vector<std::pair<std::string, std::string>> edges;
};

TwoBlocFollows two_bloc_follows(std::size_t n_users, std::size_t elites_per_side, double p_in,
                                double p_cross, std::uint64_t seed);

/// Spherical unit-norm blobs around orthonormal centers.
struct PlantedBlobs {
    EmbeddingMatrix points;
    std::vector<std::uint32_t> labels;
    std::vector<std::vector<float>> centers;
};

PlantedBlobs make_blobs(std::size_t n, std::size_t k, std::size_t dim, double noise,
                        std::uint64_t seed);

/// Full corpus generator: planted blocs, topics, toxicity, drift and waves,
/// with a truth sidecar for the acceptance suite.
struct SynthParams {
    std::size_t n_users = 300;
    std::size_t elites_per_side = 20;
    std::size_t candidates_per_side = 10;
    double p_follow_in = 0.9;
    double p_follow_cross = 0.05;
    double p_candidate_in = 0.8;
    double p_candidate_cross = 0.1;

    std::size_t n_tweets = 5000;
    std::size_t n_topics = 5;
    std::size_t n_wave_topics = 2;
    double wave_share = 0.8;       // share of a wave topic's tweets mentioning the target
    double drift_right_share = 0.6; // share of non-wave topics drifting rightward

    std::size_t embedding_dim = 64;
    double blob_noise = 0.15;

    int first_year = 2022;
    int first_month = 1;  // 1-12
    int n_months = 12;

    std::uint64_t seed = 42;
};

/// Writes tweets.jsonl, users.csv, follows.csv, elites.txt, embeddings.bin
/// (+ .ids), scorer_lexicon.txt, perturbations.tsv, config.toml and
/// truth.json into out_dir. Byte-deterministic for a fixed seed.
void gen_synthetic(const SynthParams& params, const std::string& out_dir);

} // namespace polarlens
