#include "polarlens/topics.hpp"

#include "polarlens/common.hpp"
#include "polarlens/text_clean.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace polarlens {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<std::size_t> bucket_indices(const Topic& topic) {
    std::vector<std::size_t> idx;
    idx.reserve(topic.member_tweets.size() + topic.assigned_tweets.size());
    idx.insert(idx.end(), topic.member_tweets.begin(), topic.member_tweets.end());
    idx.insert(idx.end(), topic.assigned_tweets.begin(), topic.assigned_tweets.end());
    return idx;
}

std::optional<std::string> pair_label(double wave, double target) {
    if (wave == 0.0 || target == 0.0) return std::nullopt;
    std::string a = wave > 0.0 ? "right" : "left";
    std::string b = target > 0.0 ? "right" : "left";
    return a + "_vs_" + b;
}

} // namespace

std::map<std::string, std::size_t> token_counts(const std::vector<Tweet>& tweets,
                                                const std::vector<std::size_t>& indices) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t i : indices)
        for (const auto& tok : split_tokens(tweets.at(i).clean_text))
            ++counts[ascii_lower(tok)];
    return counts;
}

std::vector<Keyword> pmi_keywords(const std::map<std::string, std::size_t>& cluster_counts,
                                  const std::map<std::string, std::size_t>& global_counts,
                                  std::size_t n_clusters, double alpha, std::size_t top_k) {
    if (alpha < 0.0) throw domain_error("pmi_keywords: alpha must be >= 0");
    if (n_clusters == 0) throw domain_error("pmi_keywords: n_clusters must be >= 1");

    std::size_t cluster_total = 0;
    for (const auto& [w, c] : cluster_counts) cluster_total += c;
    if (cluster_total == 0) return {};

    std::size_t grand_total = 0;
    for (const auto& [w, c] : global_counts) grand_total += c;
    const double v = static_cast<double>(global_counts.size());
    const double k = static_cast<double>(n_clusters);
    const double t = static_cast<double>(grand_total) + alpha * v * k;
    const double col = static_cast<double>(cluster_total) + alpha * v;

    // Joint cell (w, C) = c_wC + alpha, row sum = c_w + alpha*K, column sum =
    // c_C + alpha*V, table total = N + alpha*V*K; PMI falls out in closed form.
    std::vector<Keyword> scored;
    scored.reserve(global_counts.size());
    for (const auto& [word, c_w] : global_counts) {
        auto it = cluster_counts.find(word);
        double c_wc = it == cluster_counts.end() ? 0.0 : static_cast<double>(it->second);
        double row = static_cast<double>(c_w) + alpha * k;
        double pmi = std::log2((c_wc + alpha) * t / (row * col));
        scored.push_back({word, pmi});
    }
    std::sort(scored.begin(), scored.end(), [](const Keyword& a, const Keyword& b) {
        if (a.pmi != b.pmi) return a.pmi > b.pmi;
        return a.word < b.word;
    });
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

TopicStats topic_stats(const Topic& topic, const TopicContext& ctx, std::optional<int> month) {
    const auto& tweets = *ctx.tweets;
    TopicStats st;
    st.month = month;

    std::set<std::string> authors;
    std::set<std::string> toxic_authors;
    double tox_sum = 0.0;
    std::size_t tox_n = 0;
    for (std::size_t i : bucket_indices(topic)) {
        const Tweet& tw = tweets.at(i);
        if (month && month_index(tw.created_at) != *month) continue;
        ++st.n_tweets;
        authors.insert(tw.user_id);
        if (tw.toxicity) {
            tox_sum += *tw.toxicity;
            ++tox_n;
            if (label_toxic(*tw.toxicity)) {
                ++st.n_toxic;
                toxic_authors.insert(tw.user_id);
            }
        }
    }
    if (st.n_tweets == 0) return st;

    st.pct_toxic = static_cast<double>(st.n_toxic) / static_cast<double>(st.n_tweets);
    st.avg_toxicity = tox_n ? tox_sum / static_cast<double>(tox_n) : 0.0;
    st.n_users = authors.size();

    std::vector<double> partisan, partisan_toxic, years, user_tox;
    std::size_t resolved = 0, verified = 0;
    for (const auto& uid : authors) {
        const UserProfile* u = ctx.users ? ctx.users->by_id(uid) : nullptr;
        if (u) {
            ++resolved;
            if (u->verified) ++verified;
            years.push_back(u->years_active(ctx.reference_time));
            if (u->partisanship) {
                partisan.push_back(*u->partisanship);
                if (toxic_authors.count(uid)) partisan_toxic.push_back(*u->partisanship);
            }
        }
        if (ctx.user_toxicity) {
            auto it = ctx.user_toxicity->find(uid);
            if (it != ctx.user_toxicity->end()) user_tox.push_back(it->second);
        }
    }
    st.n_users_with_partisanship = partisan.size();
    st.pct_verified = resolved ? static_cast<double>(verified) / static_cast<double>(resolved)
                               : 0.0;
    st.mean_years_active = years.empty() ? 0.0 : mean_of(years);
    st.mean_user_toxicity = user_tox.empty() ? 0.0 : mean_of(user_tox);
    if (!partisan.empty()) {
        double m = mean_of(partisan);
        st.mean_partisanship = m;
        st.std_partisanship = pop_std(partisan, m);
    }
    if (!partisan_toxic.empty()) st.mean_partisanship_toxic_users = mean_of(partisan_toxic);
    return st;
}

MonthlySeries monthly_series(const Topic& topic, const TopicContext& ctx, int first_month,
                             int n_months) {
    if (n_months < 1) throw domain_error("monthly_series: n_months must be >= 1");
    MonthlySeries series;
    series.first_month = first_month;
    series.months.reserve(static_cast<std::size_t>(n_months));
    for (int m = 0; m < n_months; ++m)
        series.months.push_back(topic_stats(topic, ctx, first_month + m));

    const TopicStats* first_p = nullptr;
    const TopicStats* last_p = nullptr;
    const TopicStats* first_t = nullptr;
    const TopicStats* last_t = nullptr;
    for (const auto& st : series.months) {
        if (st.mean_partisanship) {
            if (!first_p) first_p = &st;
            last_p = &st;
        }
        if (!st.empty()) {
            if (!first_t) first_t = &st;
            last_t = &st;
        }
    }
    if (first_p && last_p && first_p != last_p) {
        series.swing.swing_partisanship = *last_p->mean_partisanship - *first_p->mean_partisanship;
        series.swing.right_leaning = *series.swing.swing_partisanship > 0.0;
    }
    if (first_t && last_t && first_t != last_t) {
        series.swing.swing_toxicity = last_t->avg_toxicity - first_t->avg_toxicity;
        series.swing.toxicity_rising = *series.swing.swing_toxicity > 0.0;
    }
    return series;
}

std::vector<Wave> detect_waves(const std::vector<Topic>& topics, const TopicContext& ctx,
                               double majority) {
    if (!(majority >= 0.5 && majority <= 1.0))
        throw domain_error("detect_waves: majority must be in [0.5, 1]");
    const auto& tweets = *ctx.tweets;
    std::vector<Wave> waves;
    for (const auto& topic : topics) {
        auto idx = bucket_indices(topic);
        if (idx.empty()) continue;
        std::map<std::string, std::size_t> per_handle; // tweets mentioning handle
        for (std::size_t i : idx) {
            std::set<std::string> seen;
            for (const auto& h : tweets.at(i).mentions) seen.insert(ascii_lower(h));
            for (const auto& h : seen) ++per_handle[h];
        }
        std::string target;
        std::size_t best = 0;
        for (const auto& [h, c] : per_handle) {
            if (c > best) { // first hit in map order keeps the smallest handle on ties
                best = c;
                target = h;
            }
        }
        double share = static_cast<double>(best) / static_cast<double>(idx.size());
        if (best == 0 || share <= majority) continue;

        Wave w;
        w.cluster_id = topic.cluster_id;
        w.target_handle = target;
        w.n_tweets = best;
        w.n_topic_tweets = idx.size();
        w.share = share;

        std::set<std::string> wave_authors;
        for (std::size_t i : idx) {
            const Tweet& tw = tweets.at(i);
            for (const auto& h : tw.mentions) {
                if (ascii_lower(h) == target) {
                    wave_authors.insert(tw.user_id);
                    break;
                }
            }
        }
        std::vector<double> partisan;
        for (const auto& uid : wave_authors) {
            const UserProfile* u = ctx.users ? ctx.users->by_id(uid) : nullptr;
            if (u && u->partisanship) partisan.push_back(*u->partisanship);
        }
        if (!partisan.empty()) w.mean_wave_partisanship = mean_of(partisan);
        const UserProfile* tu = ctx.users ? ctx.users->by_handle(target) : nullptr;
        if (tu && tu->partisanship) w.target_partisanship = *tu->partisanship;
        if (w.mean_wave_partisanship && w.target_partisanship)
            w.orientation_pair = pair_label(*w.mean_wave_partisanship, *w.target_partisanship);
        waves.push_back(std::move(w));
    }
    return waves;
}

std::map<std::string, double> wave_cell_shares(const std::vector<Wave>& waves) {
    std::map<std::string, std::size_t> counts;
    std::size_t defined = 0;
    for (const auto& w : waves) {
        if (!w.orientation_pair) continue;
        ++counts[*w.orientation_pair];
        ++defined;
    }
    std::map<std::string, double> shares;
    if (defined == 0) return shares;
    for (const char* cell : {"left_vs_left", "left_vs_right", "right_vs_left", "right_vs_right"})
        shares[cell] = static_cast<double>(counts[cell]) / static_cast<double>(defined);
    return shares;
}

} // namespace polarlens
