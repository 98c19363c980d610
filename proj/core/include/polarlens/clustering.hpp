#pragma once

#include "polarlens/embedding.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polarlens {

inline constexpr double kDefaultLambdaDist = 0.40;
inline constexpr double kDefaultMinAssignSim = 0.60;
inline constexpr std::size_t kDefaultMinTopicSize = 50;

inline constexpr std::uint32_t kUnassigned = 0xffffffffu;

/// Fitted DP-Means model: K unit-norm centers over E dims, f32 row-major.
struct ClusterModel {
    std::vector<float> centers;
    std::size_t dim = 0;
    std::vector<std::size_t> counts;
    double lambda_dist = kDefaultLambdaDist;
    double min_assign_sim = kDefaultMinAssignSim;
    bool warning = false; // max_iter exhausted with a spawn still pending

    std::size_t k() const { return counts.size(); }
    std::span<const float> center(std::size_t c) const {
        return {centers.data() + c * dim, dim};
    }
};

struct DpMeansOptions {
    double lambda_dist = kDefaultLambdaDist;
    double min_assign_sim = kDefaultMinAssignSim;
    std::size_t batch_size = 4096;
    std::size_t max_iter = 100;
    std::uint64_t seed = 0;
    bool spawn_per_batch = false; // accelerated mode: spawn inside each batch
};

struct DpMeansResult {
    ClusterModel model;
    std::vector<std::uint32_t> assignments; // one cluster index per point
    std::size_t iterations = 0;
};

/// DP-Means with delayed cluster creation. Starts from a single center (the
/// normalized global mean), assigns all points each outer iteration, then
/// spawns at most one new center at the farthest point if its cosine distance
/// exceeds lambda_dist. Deterministic for fixed input order and parameters;
/// the mini-batch split never changes the result in the default mode.
DpMeansResult dpmeans_fit(const EmbeddingMatrix& x, const DpMeansOptions& opts = {});

/// Supplementary assignment: nearest center if similarity >= min_assign_sim,
/// else kUnassigned. Ties go to the lowest center index.
std::vector<std::uint32_t> assign(const ClusterModel& model, const EmbeddingMatrix& x);

/// Member index with the largest cosine similarity to the cluster center;
/// ties go to the lowest member index.
std::size_t representative(const ClusterModel& model, std::size_t cluster,
                           const EmbeddingMatrix& x, const std::vector<std::size_t>& members);

/// clusters.bin shares the embeddings.bin layout ("EMB1", u32 K, u32 E, f32
/// rows); counts and parameters live in a JSON sidecar.
void save_cluster_model(const std::string& bin_path, const std::string& json_path,
                        const ClusterModel& m);
ClusterModel load_cluster_model(const std::string& bin_path, const std::string& json_path);

} // namespace polarlens
