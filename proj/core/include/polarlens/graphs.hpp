#pragma once

#include "polarlens/corpus.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polarlens {

struct GraphNode {
    std::string id;
    std::optional<double> toxicity;    // mean user toxicity
    std::optional<double> partisanship; // ideology z-score
};

struct GraphEdge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint32_t weight = 1; // mention multiplicity
};

/// Directed mention graph: author -> mentioned user. Immutable after build.
struct MentionGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges; // sorted by (src, dst), unique pairs
    std::map<std::string, std::uint32_t> node_index;

    const GraphNode* find(const std::string& id) const {
        auto it = node_index.find(id);
        return it == node_index.end() ? nullptr : &nodes[it->second];
    }
};

/// One edge occurrence per (tweet, mention) pair; self-mentions dropped.
/// With restrict_to_known, mentions of handles absent from the user table
/// are skipped; otherwise they become attribute-free nodes keyed by
/// "@handle". Every known user is a node even when isolated.
MentionGraph build_mention_graph(const std::vector<Tweet>& tweets,
                                 const std::vector<UserProfile>& users,
                                 const std::map<std::string, double>& user_toxicity,
                                 bool restrict_to_known = true);

struct AssortativityOptions {
    bool directed = true;  // false: count each edge in both orientations
    bool weighted = true;  // false: ignore multiplicities
};

/// Pearson correlation between source and target node attributes over the
/// edge multiset. attr is "toxicity" or "partisanship"; edges with a missing
/// endpoint attribute are excluded. Throws degenerate_error when fewer than
/// two usable edges remain or either side has zero variance.
double numeric_assortativity(const MentionGraph& g, const std::string& attr,
                             const AssortativityOptions& opts = {});

struct MentionAggregates {
    std::string user_id;
    std::optional<double> mean_mentioned_toxicity;
    std::optional<double> mean_mentioned_partisanship;
    std::optional<double> std_mentioned_partisanship; // population
    std::optional<double> mean_abs_partisanship_gap;  // vs own partisanship
};

/// Multiplicity-weighted aggregates over each user's out-neighborhood, one
/// record per user table row. Users with no mentions get absent values.
std::vector<MentionAggregates> mention_aggregates(const MentionGraph& g,
                                                  const std::vector<UserProfile>& users,
                                                  bool weighted = true);

void write_edges_csv(const std::string& path, const MentionGraph& g);
void write_aggregates_csv(const std::string& path, const std::vector<MentionAggregates>& rows);

} // namespace polarlens
