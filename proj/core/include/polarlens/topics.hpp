#pragma once

#include "polarlens/corpus.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polarlens {

inline constexpr double kDefaultPmiAlpha = 1.0;
inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr double kDefaultWaveMajority = 0.5; // strict: share must exceed it

struct Keyword {
    std::string word;
    double pmi = 0.0;
};

/// One cluster viewed as a topic. Tweet references are indices into the
/// loaded corpus; members are the toxic seed tweets the cluster was fitted
/// on, assigned are supplementary tweets attached afterwards.
struct Topic {
    std::uint32_t cluster_id = 0;
    std::vector<std::size_t> member_tweets;
    std::vector<std::size_t> assigned_tweets;
    std::vector<Keyword> keywords;
    std::string representative_tweet_id;
};

struct TopicStats {
    std::size_t n_tweets = 0;
    std::size_t n_toxic = 0;
    double pct_toxic = 0.0;
    double avg_toxicity = 0.0;
    std::optional<double> mean_partisanship;
    std::optional<double> std_partisanship; // population
    std::optional<double> mean_partisanship_toxic_users;
    std::size_t n_users = 0;
    std::size_t n_users_with_partisanship = 0;
    double pct_verified = 0.0;
    double mean_user_toxicity = 0.0;
    double mean_years_active = 0.0;
    std::optional<int> month; // month index when bucketed

    bool empty() const { return n_tweets == 0; }
};

struct SwingSummary {
    std::optional<double> swing_partisanship;
    std::optional<double> swing_toxicity;
    bool right_leaning = false;   // swing_partisanship > 0
    bool toxicity_rising = false; // swing_toxicity > 0
};

struct MonthlySeries {
    int first_month = 0; // month index of months[0]
    std::vector<TopicStats> months;
    SwingSummary swing;
};

/// Shared read-only context for topic statistics.
struct TopicContext {
    const std::vector<Tweet>* tweets = nullptr;
    const UserLookup* users = nullptr;
    /// Mean toxicity per user id, computed corpus-wide.
    const std::map<std::string, double>* user_toxicity = nullptr;
    /// Date against which account ages are measured.
    UtcTime reference_time{};
};

/// Lowercased cleaned-token counts over the given tweets.
std::map<std::string, std::size_t> token_counts(const std::vector<Tweet>& tweets,
                                                const std::vector<std::size_t>& indices);

/// Additively smoothed PMI of every vocabulary word against one cluster:
/// every (word, cluster) cell gets +alpha, probabilities come from the
/// smoothed joint table. Returns the top_k words by PMI descending, ties
/// alphabetical. An empty cluster yields an empty list.
std::vector<Keyword> pmi_keywords(const std::map<std::string, std::size_t>& cluster_counts,
                                  const std::map<std::string, std::size_t>& global_counts,
                                  std::size_t n_clusters, double alpha = kDefaultPmiAlpha,
                                  std::size_t top_k = kDefaultTopK);

/// Aggregates over member + assigned tweets, optionally restricted to one
/// calendar month (month index). User-level fields run over the unique
/// authors in the bucket; users lacking partisanship are excluded from the
/// partisanship aggregates and reported via n_users_with_partisanship.
TopicStats topic_stats(const Topic& topic, const TopicContext& ctx,
                       std::optional<int> month = std::nullopt);

/// Per-month stats across [first_month, first_month + n_months) plus the
/// swing between the first and last months where the quantity is defined.
MonthlySeries monthly_series(const Topic& topic, const TopicContext& ctx, int first_month,
                             int n_months);

struct Wave {
    std::uint32_t cluster_id = 0;
    std::string target_handle; // lowercased
    std::size_t n_tweets = 0;  // topic tweets mentioning the target
    std::size_t n_topic_tweets = 0;
    double share = 0.0;
    std::optional<double> mean_wave_partisanship;
    std::optional<double> target_partisanship;
    /// "right_vs_left" etc.; absent when either sign is unavailable or zero.
    std::optional<std::string> orientation_pair;
};

/// A topic is a toxicity wave when more than `majority` of its tweets
/// mention one common handle. The orientation pair classifies the sign of
/// the wave users' mean partisanship against the target's.
std::vector<Wave> detect_waves(const std::vector<Topic>& topics, const TopicContext& ctx,
                               double majority = kDefaultWaveMajority);

/// Share of detected waves per orientation pair; sums to 1 over waves with
/// a defined pair. Keys are the four pair labels.
std::map<std::string, double> wave_cell_shares(const std::vector<Wave>& waves);

} // namespace polarlens
