#include "polarlens/pipeline.hpp"

#include "polarlens/clustering.hpp"
#include "polarlens/common.hpp"
#include "polarlens/corpus.hpp"
#include "polarlens/embedding.hpp"
#include "polarlens/graphs.hpp"
#include "polarlens/ideology.hpp"
#include "polarlens/providers.hpp"
#include "polarlens/stats.hpp"
#include "polarlens/text_clean.hpp"
#include "polarlens/timeutil.hpp"
#include "polarlens/topics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace polarlens {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

int log_level() {
    static int level = [] {
        const char* env = std::getenv("POLARLENS_LOG");
        if (!env) return 1;
        std::string v = ascii_lower(env);
        if (v == "0" || v == "off" || v == "quiet" || v == "error") return 0;
        if (v == "2" || v == "debug") return 2;
        return 1;
    }();
    return level;
}

void plog(int level, const std::string& msg) {
    if (log_level() >= level) std::fprintf(stderr, "[polarlens] %s\n", msg.c_str());
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string resolve(const std::string& path, const std::string& base) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute() || base.empty()) return path;
    return (fs::path(base) / p).string();
}

std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw io_error("cannot write " + p.string());
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header)
        throw io_error(path.string() + ": expected header \"" + header + "\", got \"" + line +
                       "\"");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t b = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                f.emplace_back(line.substr(b, i - b));
                b = i + 1;
            }
        }
        rows.push_back(std::move(f));
    }
    return rows;
}

double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw io_error(std::string("bad number for ") + what + ": \"" + s + "\"");
    }
}

int month_from_label(const std::string& label) {
    return month_index(parse_iso8601(label + "-01"));
}

UtcTime month_start(int idx) {
    return parse_iso8601(month_label(idx) + "-01");
}

// ---- per-stage output paths ----------------------------------------------

struct Paths {
    fs::path out;
    fs::path norm_tweets, rejects, ingest_stats;
    fs::path scores;
    fs::path ca_model, partisanship, expansion;
    fs::path clusters_bin, clusters_json, assignments, derived_emb, derived_emb_ids;
    fs::path topics_json, waves_json;
    fs::path edges_csv, aggregates_csv, assortativity;
    fs::path gam_dir, user_table, user_model, user_selection, user_importance;
    fs::path topic_table, topic_model, topic_selection, topic_importance;
    fs::path summary, manifest;

    explicit Paths(const std::string& out_dir) : out(out_dir) {
        norm_tweets = out / "ingest" / "tweets.norm.jsonl";
        rejects = out / "ingest" / "rejects.json";
        ingest_stats = out / "ingest" / "stats.json";
        scores = out / "score" / "scores.csv";
        ca_model = out / "ideology" / "ca_model.json";
        partisanship = out / "ideology" / "partisanship.csv";
        expansion = out / "ideology" / "expansion.json";
        clusters_bin = out / "cluster" / "clusters.bin";
        clusters_json = out / "cluster" / "clusters.json";
        assignments = out / "cluster" / "assignments.csv";
        derived_emb = out / "cluster" / "embeddings.bin";
        derived_emb_ids = out / "cluster" / "embeddings.ids";
        topics_json = out / "topics" / "topics.json";
        waves_json = out / "topics" / "waves.json";
        edges_csv = out / "graph" / "edges.csv";
        aggregates_csv = out / "graph" / "aggregates.csv";
        assortativity = out / "graph" / "assortativity.json";
        gam_dir = out / "gam";
        user_table = gam_dir / "user_table.csv";
        user_model = gam_dir / "user_model.json";
        user_selection = gam_dir / "user_selection.json";
        user_importance = gam_dir / "user_importance.json";
        topic_table = gam_dir / "topic_table.csv";
        topic_model = gam_dir / "topic_model.json";
        topic_selection = gam_dir / "topic_selection.json";
        topic_importance = gam_dir / "topic_importance.json";
        summary = out / "report" / "summary.json";
        manifest = out / "manifest.json";
    }

    std::vector<fs::path> stage_outputs(Stage s) const {
        switch (s) {
            case Stage::ingest: return {norm_tweets, rejects, ingest_stats};
            case Stage::score: return {scores};
            case Stage::ideology: return {ca_model, partisanship, expansion};
            case Stage::cluster: return {clusters_bin, clusters_json, assignments};
            case Stage::topics: return {topics_json, waves_json};
            case Stage::graph: return {edges_csv, aggregates_csv, assortativity};
            case Stage::gam:
                return {user_table, user_model, user_selection, user_importance,
                        topic_table, topic_model, topic_selection, topic_importance};
            case Stage::report: return {summary};
        }
        throw error("unknown stage");
    }
};

// ---- shared loaders --------------------------------------------------------

std::vector<Tweet> load_norm_tweets(const Paths& p) {
    auto res = load_tweets(p.norm_tweets.string());
    if (!res.rejects.empty())
        throw io_error("normalized tweet file is corrupt: " + p.norm_tweets.string());
    return res.tweets;
}

std::map<std::string, double> load_scores(const Paths& p) {
    std::map<std::string, double> scores;
    for (const auto& row : read_csv(p.scores, "tweet_id,toxicity")) {
        if (row.size() != 2) throw io_error("scores.csv: expected 2 fields");
        scores[row[0]] = parse_double(row[1], "toxicity");
    }
    return scores;
}

void apply_scores(std::vector<Tweet>& tweets, const std::map<std::string, double>& scores) {
    for (auto& t : tweets) {
        auto it = scores.find(t.id);
        if (it == scores.end()) throw io_error("no toxicity score for tweet " + t.id);
        t.toxicity = it->second;
    }
}

std::map<std::string, double> load_partisanship(const Paths& p) {
    std::map<std::string, double> z;
    for (const auto& row : read_csv(p.partisanship, "user_id,score,z")) {
        if (row.size() != 3) throw io_error("partisanship.csv: expected 3 fields");
        z[row[0]] = parse_double(row[2], "z");
    }
    return z;
}

void apply_partisanship(std::vector<UserProfile>& users, const std::map<std::string, double>& z) {
    for (auto& u : users) {
        auto it = z.find(u.id);
        if (it != z.end()) u.partisanship = it->second;
    }
}

std::map<std::string, double> mean_user_toxicity(const std::vector<Tweet>& tweets) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& t : tweets) {
        if (!t.toxicity) throw error("tweet without toxicity in scored corpus: " + t.id);
        auto& a = acc[t.user_id];
        a.first += *t.toxicity;
        a.second += 1;
    }
    std::map<std::string, double> out;
    for (const auto& [id, a] : acc) out[id] = a.first / static_cast<double>(a.second);
    return out;
}

struct Window {
    int first_month = 0;
    int n_months = 0;
};

Window corpus_window(const PipelineConfig& cfg, const std::vector<Tweet>& tweets) {
    if (cfg.first_month && cfg.n_months > 0) return {*cfg.first_month, cfg.n_months};
    if (tweets.empty()) throw degenerate_error("cannot derive a window from an empty corpus");
    int lo = month_index(tweets[0].created_at), hi = lo;
    for (const auto& t : tweets) {
        int m = month_index(t.created_at);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    return {lo, hi - lo + 1};
}

std::unique_ptr<ToxicityScorer> make_scorer(const PipelineConfig& cfg) {
    if (cfg.provider_mode == "stub") {
        if (cfg.scorer_lexicon_path.empty())
            throw config_error("stub scorer requires inputs.scorer_lexicon");
        return std::make_unique<StubScorer>(load_scorer_lexicon(cfg.scorer_lexicon_path));
    }
    if (cfg.scorer_port <= 0) throw config_error("http scorer requires providers.scorer_port");
    HttpProviderOptions o;
    o.host = cfg.scorer_host;
    o.port = cfg.scorer_port;
    o.batch_size = cfg.provider_batch;
    o.max_concurrency = cfg.provider_concurrency;
    return std::make_unique<HttpScorer>(o);
}

std::unique_ptr<Embedder> make_embedder(const PipelineConfig& cfg) {
    if (cfg.provider_mode == "stub")
        return std::make_unique<StubEmbedder>(cfg.embedding_dim, cfg.seed);
    if (cfg.embedder_port <= 0) throw config_error("http embedder requires providers.embedder_port");
    HttpProviderOptions o;
    o.host = cfg.embedder_host;
    o.port = cfg.embedder_port;
    o.batch_size = cfg.provider_batch;
    o.max_concurrency = cfg.provider_concurrency;
    return std::make_unique<HttpEmbedder>(o, cfg.embedding_dim);
}

/// One embedding row per tweet, in corpus order. Prefers the configured
/// embeddings file, then embeddings materialized by a previous cluster run,
/// then the embedding provider (persisting the result for resumability).
EmbeddingMatrix corpus_embeddings(const PipelineConfig& cfg, const Paths& p,
                                  const std::vector<Tweet>& tweets) {
    auto align = [&](const EmbeddingMatrix& src) {
        EmbeddingMatrix out;
        for (const auto& t : tweets) {
            std::size_t i = src.find(t.id);
            if (i == EmbeddingMatrix::npos)
                throw io_error("embeddings file lacks a row for tweet " + t.id);
            out.append(t.id, src.row(i));
        }
        return out;
    };
    if (!cfg.embeddings_path.empty()) {
        auto src = load_embeddings(cfg.embeddings_path, ids_sidecar_path(cfg.embeddings_path));
        return align(src);
    }
    if (fs::exists(p.derived_emb) && fs::exists(p.derived_emb_ids))
        return align(load_embeddings(p.derived_emb.string(), p.derived_emb_ids.string()));

    plog(1, "embedding " + std::to_string(tweets.size()) + " tweets via provider");
    auto embedder = make_embedder(cfg);
    std::vector<std::string> texts;
    texts.reserve(tweets.size());
    for (const auto& t : tweets) texts.push_back(t.clean_text);
    auto vectors = embedder->embed(texts);
    if (vectors.size() != tweets.size())
        throw io_error("embedding provider returned a wrong row count");
    EmbeddingMatrix out;
    for (std::size_t i = 0; i < tweets.size(); ++i) out.append(tweets[i].id, vectors[i]);
    fs::create_directories(p.derived_emb.parent_path());
    save_embeddings(p.derived_emb.string(), p.derived_emb_ids.string(), out);
    return out;
}

// ---- stages ----------------------------------------------------------------

void stage_ingest(const PipelineConfig& cfg, const Paths& p) {
    LanguagePredicate pred = accept_all_languages();
    if (!cfg.lang_allow.empty()) {
        std::set<std::string> allow(cfg.lang_allow.begin(), cfg.lang_allow.end());
        pred = [allow](const Tweet& t) { return t.lang && allow.count(*t.lang) != 0; };
    }
    auto res = load_tweets(cfg.tweets_path, pred);
    if (res.tweets.empty()) throw degenerate_error("ingest accepted no tweets");

    auto users = load_users(cfg.users_path);
    std::set<std::string> ids;
    for (const auto& u : users)
        if (!ids.insert(u.id).second) throw io_error("duplicate user id: " + u.id);

    auto out = open_out(p.norm_tweets);
    for (const auto& t : res.tweets) {
        ordered_json j{{"id", t.id},
                       {"user_id", t.user_id},
                       {"created_at", format_iso8601(t.created_at)},
                       {"text", t.raw_text},
                       {"mentions", t.mentions}};
        if (t.toxicity) j["toxicity"] = *t.toxicity;
        if (t.lang) j["lang"] = *t.lang;
        out << j.dump() << '\n';
    }
    write_rejects_report(p.rejects.string(), res.rejects);
    ordered_json stats{{"schema", "polarlens/1"},
                       {"input_lines", res.input_lines},
                       {"accepted", res.tweets.size()},
                       {"rejected", res.rejects.size()},
                       {"n_users", users.size()}};
    open_out(p.ingest_stats) << stats.dump(2) << '\n';
    plog(1, "ingest: " + std::to_string(res.tweets.size()) + " tweets, " +
                std::to_string(res.rejects.size()) + " rejects");
}

void stage_score(const PipelineConfig& cfg, const Paths& p) {
    auto tweets = load_norm_tweets(p);
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < tweets.size(); ++i)
        if (!tweets[i].toxicity) missing.push_back(i);

    if (!missing.empty()) {
        plog(1, "scoring " + std::to_string(missing.size()) + " tweets via provider");
        auto scorer = make_scorer(cfg);
        std::vector<std::string> texts;
        texts.reserve(missing.size());
        for (std::size_t i : missing) texts.push_back(tweets[i].raw_text);
        auto scores = scorer->score(texts);
        if (scores.size() != missing.size())
            throw io_error("toxicity provider returned a wrong score count");
        for (std::size_t k = 0; k < missing.size(); ++k) {
            if (scores[k] < 0.0 || scores[k] > 1.0)
                throw domain_error("provider toxicity outside [0,1]");
            tweets[missing[k]].toxicity = scores[k];
        }
    }
    auto out = open_out(p.scores);
    out << "tweet_id,toxicity\n";
    for (const auto& t : tweets) out << t.id << ',' << fmt(*t.toxicity) << '\n';
}

void stage_ideology(const PipelineConfig& cfg, const Paths& p) {
    auto edges = load_follows(cfg.follows_path);

    std::set<std::string> elite_set;
    {
        std::ifstream in(cfg.elites_path);
        if (!in) throw io_error("cannot open elites file: " + cfg.elites_path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            elite_set.insert(line);
        }
    }
    if (elite_set.size() < 2) throw config_error("need at least 2 seed elite accounts");
    if (!elite_set.count(cfg.anchor))
        throw config_error("ideology.anchor is not in the seed elite list: " + cfg.anchor);

    std::vector<std::pair<std::string, std::string>> stage1_edges;
    for (const auto& e : edges)
        if (elite_set.count(e.second)) stage1_edges.push_back(e);
    auto m1 = build_follow_matrix(stage1_edges, cfg.min_follows);
    auto ca1 = ca_fit(m1, cfg.ca_dims, cfg.anchor);

    std::map<std::string, std::set<std::string>> follows_map;
    for (const auto& [u, a] : edges) follows_map[u].insert(a);
    std::set<std::string> candidates;
    for (const auto& e : edges)
        if (!elite_set.count(e.second)) candidates.insert(e.second);

    std::map<std::string, double> scores1;
    for (const auto& [user, followed] : follows_map) {
        std::vector<std::string> ids(followed.begin(), followed.end());
        try {
            scores1[user] = ca_project_ids(ca1, ids)(0);
        } catch (const domain_error&) {
            // follows none of the model columns; not scorable in stage 1
        }
    }

    std::vector<std::string> picked_c, picked_l;
    EliteExpansion ex;
    if (!candidates.empty()) {
        ex = expand_elites(scores1, follows_map, candidates, cfg.top_pct,
                           cfg.min_elite_followers);
        for (const auto& c : ex.conservative_ranked) {
            if (picked_c.size() >= cfg.expand_top_n || c.pop_conservative() <= 0) break;
            picked_c.push_back(c.id);
        }
        for (const auto& c : ex.liberal_ranked) {
            if (picked_l.size() >= cfg.expand_top_n || c.pop_liberal() <= 0) break;
            picked_l.push_back(c.id);
        }
    }

    std::set<std::string> stage3_cols = elite_set;
    stage3_cols.insert(picked_c.begin(), picked_c.end());
    stage3_cols.insert(picked_l.begin(), picked_l.end());
    std::vector<std::pair<std::string, std::string>> stage3_edges;
    for (const auto& e : edges)
        if (stage3_cols.count(e.second)) stage3_edges.push_back(e);
    auto m3 = build_follow_matrix(stage3_edges, cfg.min_follows);
    auto ca3 = ca_fit(m3, cfg.ca_dims, cfg.anchor);

    std::map<std::string, double> final_scores;
    for (const auto& [user, followed] : follows_map) {
        std::vector<std::string> ids(followed.begin(), followed.end());
        try {
            final_scores[user] = ca_project_ids(ca3, ids)(0);
        } catch (const domain_error&) {
        }
    }
    if (final_scores.size() < 2)
        throw degenerate_error("fewer than 2 users received ideology scores");

    std::vector<double> raw;
    raw.reserve(final_scores.size());
    for (const auto& [user, s] : final_scores) raw.push_back(s);
    auto std_scores = standardize(raw);
    ca3.zmean = std_scores.mean;
    ca3.zstd = std_scores.std;

    save_ca_model(p.ca_model.string(), ca3);
    {
        auto out = open_out(p.partisanship);
        out << "user_id,score,z\n";
        std::size_t i = 0;
        for (const auto& [user, s] : final_scores)
            out << user << ',' << fmt(s) << ',' << fmt(std_scores.z[i++]) << '\n';
    }
    {
        auto ranked_json = [](const std::vector<EliteCandidate>& ranked, bool conservative) {
            ordered_json arr = ordered_json::array();
            std::size_t limit = std::min<std::size_t>(ranked.size(), 50);
            for (std::size_t i = 0; i < limit; ++i) {
                const auto& c = ranked[i];
                arr.push_back({{"id", c.id},
                               {"n_conservative", c.n_conservative},
                               {"n_liberal", c.n_liberal},
                               {"pop", conservative ? c.pop_conservative() : c.pop_liberal()}});
            }
            return arr;
        };
        ordered_json j{{"schema", "polarlens/1"},
                       {"conservative", picked_c},
                       {"liberal", picked_l},
                       {"ranked_conservative", ranked_json(ex.conservative_ranked, true)},
                       {"ranked_liberal", ranked_json(ex.liberal_ranked, false)}};
        open_out(p.expansion) << j.dump(2) << '\n';
    }
    plog(1, "ideology: scored " + std::to_string(final_scores.size()) + " users, expanded +" +
                std::to_string(picked_c.size()) + "/+" + std::to_string(picked_l.size()));
}

void stage_cluster(const PipelineConfig& cfg, const Paths& p) {
    auto tweets = load_norm_tweets(p);
    apply_scores(tweets, load_scores(p));
    auto emb = corpus_embeddings(cfg, p, tweets);

    EmbeddingMatrix toxic, rest;
    std::vector<char> is_toxic(tweets.size());
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        is_toxic[i] = label_toxic(*tweets[i].toxicity);
        (is_toxic[i] ? toxic : rest).append(tweets[i].id, emb.row(i));
    }
    if (toxic.rows() == 0) throw degenerate_error("no toxic tweets to cluster");

    DpMeansOptions opts;
    opts.lambda_dist = cfg.lambda_dist;
    opts.min_assign_sim = cfg.min_assign_sim;
    opts.batch_size = cfg.cluster_batch_size;
    opts.max_iter = cfg.cluster_max_iter;
    opts.seed = cfg.seed;
    opts.spawn_per_batch = cfg.spawn_per_batch;
    auto dp = dpmeans_fit(toxic, opts);

    std::vector<std::uint32_t> rest_assign;
    if (rest.rows() > 0) rest_assign = assign(dp.model, rest);

    save_cluster_model(p.clusters_bin.string(), p.clusters_json.string(), dp.model);
    {
        auto out = open_out(p.assignments);
        out << "tweet_id,cluster,role\n";
        std::size_t ti = 0, ri = 0;
        for (std::size_t i = 0; i < tweets.size(); ++i) {
            if (is_toxic[i]) {
                out << tweets[i].id << ',' << dp.assignments[ti++] << ",member\n";
            } else {
                std::uint32_t c = rest_assign[ri++];
                if (c == kUnassigned)
                    out << tweets[i].id << ",,none\n";
                else
                    out << tweets[i].id << ',' << c << ",assigned\n";
            }
        }
    }
    plog(1, "cluster: k=" + std::to_string(dp.model.k()) + " over " +
                std::to_string(toxic.rows()) + " toxic tweets in " +
                std::to_string(dp.iterations) + " iterations" +
                (dp.model.warning ? " (warning: unconverged spawn)" : ""));
}

/// Rebuilds the topic structures the cluster stage implies. Owns everything
/// the topic analyses reference.
struct TopicWorkspace {
    std::vector<Tweet> tweets;
    std::vector<UserProfile> users;
    std::unique_ptr<UserLookup> lookup;
    std::map<std::string, double> user_tox;
    Window window;
    ClusterModel model;
    std::vector<Topic> topics; // size-filtered, by cluster id
    std::size_t k_total = 0;
    TopicContext ctx;
};

TopicWorkspace build_topic_workspace(const PipelineConfig& cfg, const Paths& p,
                                     bool with_keywords) {
    TopicWorkspace w;
    w.tweets = load_norm_tweets(p);
    apply_scores(w.tweets, load_scores(p));
    w.users = load_users(cfg.users_path);
    apply_partisanship(w.users, load_partisanship(p));
    w.lookup = std::make_unique<UserLookup>(w.users);
    w.user_tox = mean_user_toxicity(w.tweets);
    w.window = corpus_window(cfg, w.tweets);
    w.model = load_cluster_model(p.clusters_bin.string(), p.clusters_json.string());
    w.k_total = w.model.k();

    std::map<std::string, std::size_t> tweet_idx;
    for (std::size_t i = 0; i < w.tweets.size(); ++i) tweet_idx[w.tweets[i].id] = i;

    std::vector<Topic> all(w.k_total);
    for (std::size_t c = 0; c < w.k_total; ++c) all[c].cluster_id = static_cast<std::uint32_t>(c);
    for (const auto& row : read_csv(p.assignments, "tweet_id,cluster,role")) {
        if (row.size() != 3) throw io_error("assignments.csv: expected 3 fields");
        auto it = tweet_idx.find(row[0]);
        if (it == tweet_idx.end()) throw io_error("assignments.csv references unknown tweet " + row[0]);
        if (row[2] == "none") continue;
        std::size_t c = static_cast<std::size_t>(parse_double(row[1], "cluster"));
        if (c >= all.size()) throw io_error("assignments.csv references cluster out of range");
        if (row[2] == "member")
            all[c].member_tweets.push_back(it->second);
        else if (row[2] == "assigned")
            all[c].assigned_tweets.push_back(it->second);
        else
            throw io_error("assignments.csv: unknown role \"" + row[2] + "\"");
    }

    if (with_keywords) {
        std::vector<std::size_t> all_members;
        for (const auto& t : all)
            all_members.insert(all_members.end(), t.member_tweets.begin(), t.member_tweets.end());
        auto global_counts = token_counts(w.tweets, all_members);

        // Representative lookup happens in fit-matrix space: toxic tweets in
        // corpus order.
        auto emb = corpus_embeddings(cfg, p, w.tweets);
        EmbeddingMatrix toxic;
        std::map<std::size_t, std::size_t> corpus_to_fit;
        for (std::size_t i = 0; i < w.tweets.size(); ++i) {
            if (label_toxic(*w.tweets[i].toxicity)) {
                corpus_to_fit[i] = toxic.rows();
                toxic.append(w.tweets[i].id, emb.row(i));
            }
        }
        for (auto& t : all) {
            if (t.member_tweets.empty()) continue;
            auto counts = token_counts(w.tweets, t.member_tweets);
            t.keywords = pmi_keywords(counts, global_counts, w.k_total, cfg.pmi_alpha, cfg.top_k);
            std::vector<std::size_t> fit_members;
            for (std::size_t i : t.member_tweets) fit_members.push_back(corpus_to_fit.at(i));
            std::size_t rep = representative(w.model, t.cluster_id, toxic, fit_members);
            t.representative_tweet_id = toxic.ids()[rep];
        }
    }

    for (auto& t : all)
        if (t.member_tweets.size() + t.assigned_tweets.size() >= cfg.min_topic_size)
            w.topics.push_back(std::move(t));

    w.ctx.tweets = &w.tweets;
    w.ctx.users = w.lookup.get();
    w.ctx.user_toxicity = &w.user_tox;
    w.ctx.reference_time = month_start(w.window.first_month + w.window.n_months);
    return w;
}

ordered_json stats_json(const TopicStats& s) {
    auto opt = [](const std::optional<double>& v) {
        return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    ordered_json j{{"n_tweets", s.n_tweets},
                   {"n_toxic", s.n_toxic},
                   {"pct_toxic", s.pct_toxic},
                   {"avg_toxicity", s.avg_toxicity},
                   {"mean_partisanship", opt(s.mean_partisanship)},
                   {"std_partisanship", opt(s.std_partisanship)},
                   {"mean_partisanship_toxic_users", opt(s.mean_partisanship_toxic_users)},
                   {"n_users", s.n_users},
                   {"n_users_with_partisanship", s.n_users_with_partisanship},
                   {"pct_verified", s.pct_verified},
                   {"mean_user_toxicity", s.mean_user_toxicity},
                   {"mean_years_active", s.mean_years_active}};
    if (s.month) j["month"] = month_label(*s.month);
    return j;
}

void stage_topics(const PipelineConfig& cfg, const Paths& p) {
    auto w = build_topic_workspace(cfg, p, true);

    ordered_json topics = ordered_json::array();
    for (const auto& t : w.topics) {
        ordered_json kw = ordered_json::array();
        for (const auto& k : t.keywords) kw.push_back({{"word", k.word}, {"pmi", k.pmi}});
        auto stats = topic_stats(t, w.ctx);
        auto series = monthly_series(t, w.ctx, w.window.first_month, w.window.n_months);
        ordered_json months = ordered_json::array();
        for (const auto& ms : series.months) months.push_back(stats_json(ms));
        auto opt = [](const std::optional<double>& v) {
            return v ? ordered_json(*v) : ordered_json(nullptr);
        };
        topics.push_back(
            {{"cluster", t.cluster_id},
             {"n_members", t.member_tweets.size()},
             {"n_assigned", t.assigned_tweets.size()},
             {"representative_tweet_id", t.representative_tweet_id},
             {"keywords", std::move(kw)},
             {"stats", stats_json(stats)},
             {"monthly",
              {{"first_month", month_label(series.first_month)},
               {"months", std::move(months)},
               {"swing",
                {{"swing_partisanship", opt(series.swing.swing_partisanship)},
                 {"swing_toxicity", opt(series.swing.swing_toxicity)},
                 {"right_leaning", series.swing.right_leaning},
                 {"toxicity_rising", series.swing.toxicity_rising}}}}}});
    }
    ordered_json out{{"schema", "polarlens/1"},
                     {"k_total", w.k_total},
                     {"min_topic_size", cfg.min_topic_size},
                     {"cluster_warning", w.model.warning},
                     {"topics", std::move(topics)}};
    open_out(p.topics_json) << out.dump(2) << '\n';

    auto waves = detect_waves(w.topics, w.ctx, cfg.wave_majority);
    auto cells = wave_cell_shares(waves);
    ordered_json wj = ordered_json::array();
    for (const auto& wv : waves) {
        auto opt = [](const std::optional<double>& v) {
            return v ? ordered_json(*v) : ordered_json(nullptr);
        };
        wj.push_back({{"cluster", wv.cluster_id},
                      {"target_handle", wv.target_handle},
                      {"n_tweets", wv.n_tweets},
                      {"n_topic_tweets", wv.n_topic_tweets},
                      {"share", wv.share},
                      {"mean_wave_partisanship", opt(wv.mean_wave_partisanship)},
                      {"target_partisanship", opt(wv.target_partisanship)},
                      {"orientation_pair",
                       wv.orientation_pair ? ordered_json(*wv.orientation_pair)
                                           : ordered_json(nullptr)}});
    }
    ordered_json cj = ordered_json::object();
    for (const auto& [pair, share] : cells) cj[pair] = share;
    ordered_json wout{{"schema", "polarlens/1"},
                      {"majority", cfg.wave_majority},
                      {"waves", std::move(wj)},
                      {"cell_shares", std::move(cj)}};
    open_out(p.waves_json) << wout.dump(2) << '\n';
    plog(1, "topics: " + std::to_string(w.topics.size()) + " topics (of " +
                std::to_string(w.k_total) + " clusters), " + std::to_string(waves.size()) +
                " waves");
}

void stage_graph(const PipelineConfig& cfg, const Paths& p) {
    auto tweets = load_norm_tweets(p);
    apply_scores(tweets, load_scores(p));
    auto users = load_users(cfg.users_path);
    apply_partisanship(users, load_partisanship(p));
    auto user_tox = mean_user_toxicity(tweets);

    auto g = build_mention_graph(tweets, users, user_tox, cfg.restrict_to_known);
    write_edges_csv(p.edges_csv.string(), g);
    write_aggregates_csv(p.aggregates_csv.string(), mention_aggregates(g, users, cfg.graph_weighted));

    AssortativityOptions opts{cfg.graph_directed, cfg.graph_weighted};
    ordered_json aj{{"schema", "polarlens/1"},
                    {"n_nodes", g.nodes.size()},
                    {"n_edges", g.edges.size()},
                    {"directed", opts.directed},
                    {"weighted", opts.weighted}};
    for (const std::string attr : {"toxicity", "partisanship"}) {
        try {
            aj[attr] = numeric_assortativity(g, attr, opts);
        } catch (const degenerate_error& e) {
            aj[attr] = nullptr;
            aj[attr + "_error"] = e.what();
        }
    }
    open_out(p.assortativity) << aj.dump(2) << '\n';
    plog(1, "graph: " + std::to_string(g.nodes.size()) + " nodes, " +
                std::to_string(g.edges.size()) + " edges");
}

// ---- GAM stage -------------------------------------------------------------

struct GamTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols; // raw, one per name
    std::vector<double> y;
    std::string response;
};

void write_table_csv(const fs::path& path, const GamTable& t) {
    auto out = open_out(path);
    for (const auto& n : t.names) out << n << ',';
    out << t.response << '\n';
    for (std::size_t r = 0; r < t.y.size(); ++r) {
        for (const auto& c : t.cols) out << fmt(c[r]) << ',';
        out << fmt(t.y[r]) << '\n';
    }
}

GamTable user_covariate_table(const TopicWorkspace& w, const PipelineConfig& cfg) {
    GamTable t;
    t.names = {"verified",
               "years_active",
               "log_followers",
               "log_following",
               "log_n_tweets",
               "partisanship",
               "mentioned_toxicity",
               "mentioned_partisanship_mean",
               "mentioned_partisanship_std",
               "partisanship_gap"};
    t.response = "mean_toxicity";
    t.cols.assign(t.names.size(), {});

    MentionGraph g = build_mention_graph(w.tweets, w.users, w.user_tox, cfg.restrict_to_known);
    auto aggregates = mention_aggregates(g, w.users, cfg.graph_weighted);

    for (std::size_t i = 0; i < w.users.size(); ++i) {
        const auto& u = w.users[i];
        const auto& a = aggregates[i];
        auto tox = w.user_tox.find(u.id);
        if (tox == w.user_tox.end()) continue; // never tweeted inside the window
        if (!u.partisanship) continue;
        if (!a.mean_mentioned_toxicity || !a.mean_mentioned_partisanship ||
            !a.std_mentioned_partisanship || !a.mean_abs_partisanship_gap)
            continue;
        double vals[10] = {u.verified ? 1.0 : 0.0,
                           u.years_active(w.ctx.reference_time),
                           std::log1p(static_cast<double>(u.followers)),
                           std::log1p(static_cast<double>(u.following)),
                           std::log1p(static_cast<double>(u.n_tweets)),
                           *u.partisanship,
                           *a.mean_mentioned_toxicity,
                           *a.mean_mentioned_partisanship,
                           *a.std_mentioned_partisanship,
                           *a.mean_abs_partisanship_gap};
        for (std::size_t c = 0; c < t.names.size(); ++c) t.cols[c].push_back(vals[c]);
        t.y.push_back(tox->second);
    }
    return t;
}

GamTable topic_month_table(const TopicWorkspace& w) {
    GamTable t;
    t.names = {"n_users",        "mean_user_toxicity", "pct_verified",
               "mean_partisanship", "std_partisanship",   "mean_years_active"};
    t.response = "avg_toxicity";
    t.cols.assign(t.names.size(), {});
    for (const auto& topic : w.topics) {
        for (int m = 0; m < w.window.n_months; ++m) {
            auto s = topic_stats(topic, w.ctx, w.window.first_month + m);
            if (s.empty()) continue;
            if (!s.mean_partisanship || !s.std_partisanship) continue;
            double vals[6] = {static_cast<double>(s.n_users),
                              s.mean_user_toxicity,
                              s.pct_verified,
                              *s.mean_partisanship,
                              *s.std_partisanship,
                              s.mean_years_active};
            for (std::size_t c = 0; c < t.names.size(); ++c) t.cols[c].push_back(vals[c]);
            t.y.push_back(s.avg_toxicity);
        }
    }
    return t;
}

void fit_and_report(const GamTable& table, const PipelineConfig& cfg, const fs::path& table_path,
                    const fs::path& model_path, const fs::path& selection_path,
                    const fs::path& importance_path, const std::string& pd_prefix,
                    const fs::path& gam_dir, std::uint64_t split_seed) {
    write_table_csv(table_path, table);

    auto fail = [&](const std::string& msg) {
        ordered_json err{{"schema", "polarlens/1"}, {"error", msg}};
        open_out(selection_path) << err.dump(2) << '\n';
        open_out(importance_path) << err.dump(2) << '\n';
        open_out(model_path) << err.dump(2) << '\n';
        plog(1, "gam " + pd_prefix + ": skipped (" + msg + ")");
    };
    if (table.y.size() < cfg.gam.min_rows) {
        fail("only " + std::to_string(table.y.size()) + " rows, need " +
             std::to_string(cfg.gam.min_rows));
        return;
    }

    // Z-score covariates; constant columns stay raw and are reported.
    std::vector<std::vector<double>> zcols = table.cols;
    std::vector<std::string> constant_cols;
    for (std::size_t c = 0; c < zcols.size(); ++c) {
        try {
            zcols[c] = standardize(zcols[c]).z;
        } catch (const degenerate_error&) {
            constant_cols.push_back(table.names[c]);
        }
    }

    auto split = train_val_split(table.y.size(), cfg.val_frac, split_seed);
    auto take = [](const std::vector<double>& v, const std::vector<std::size_t>& idx) {
        std::vector<double> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(v[i]);
        return out;
    };
    std::vector<std::vector<double>> train_cols, val_cols;
    for (const auto& c : zcols) {
        train_cols.push_back(take(c, split.train));
        val_cols.push_back(take(c, split.val));
    }
    std::vector<double> train_y = take(table.y, split.train);
    std::vector<double> val_y = take(table.y, split.val);

    ForwardSelection sel;
    try {
        sel = forward_select_aic(table.names, train_cols, train_y, cfg.gam);
    } catch (const error& e) {
        fail(e.what());
        return;
    }

    if (!val_y.empty() && !sel.model.terms.empty()) {
        std::vector<std::vector<double>> term_cols;
        for (const auto& term : sel.model.terms) {
            auto it = std::find(table.names.begin(), table.names.end(), term.basis.name);
            term_cols.push_back(val_cols[static_cast<std::size_t>(it - table.names.begin())]);
        }
        try {
            sel.model.val_r2 = r_squared(val_y, sel.model.predict(term_cols));
        } catch (const degenerate_error&) {
        }
    }

    std::vector<std::vector<double>> sel_train_cols;
    for (const auto& term : sel.model.terms) {
        auto it = std::find(table.names.begin(), table.names.end(), term.basis.name);
        sel_train_cols.push_back(train_cols[static_cast<std::size_t>(it - table.names.begin())]);
    }
    if (!sel.model.terms.empty()) {
        auto importance = permutation_importance(sel.model, sel_train_cols, train_y,
                                                 cfg.importance_repeats, split_seed);
        write_importance_json(importance_path.string(), importance);
        for (const auto& term : sel.model.terms) {
            auto pd = partial_dependence(sel.model, term.basis.name);
            write_partial_dependence_csv(
                (gam_dir / ("pd_" + pd_prefix + "_" + term.basis.name + ".csv")).string(), pd);
        }
    } else {
        ordered_json none{{"schema", "polarlens/1"}, {"note", "no features selected"}};
        open_out(importance_path) << none.dump(2) << '\n';
    }

    ordered_json trace = ordered_json::array();
    for (const auto& step : sel.trace)
        trace.push_back({{"feature", step.feature},
                         {"aic", step.aic},
                         {"accepted", step.accepted},
                         {"note", step.note}});
    std::vector<std::string> selected;
    for (const auto& term : sel.model.terms) selected.push_back(term.basis.name);
    ordered_json sj{{"schema", "polarlens/1"},
                    {"n_rows", table.y.size()},
                    {"n_train", train_y.size()},
                    {"n_val", val_y.size()},
                    {"selected", selected},
                    {"constant_columns", constant_cols},
                    {"trace", std::move(trace)},
                    {"train_r2", sel.model.train_r2},
                    {"val_r2", sel.model.val_r2 ? ordered_json(*sel.model.val_r2)
                                                : ordered_json(nullptr)},
                    {"edf", sel.model.edf},
                    {"gcv", sel.model.gcv}};
    open_out(selection_path) << sj.dump(2) << '\n';
    save_gam_model(model_path.string(), sel.model);
    plog(1, "gam " + pd_prefix + ": " + std::to_string(selected.size()) + " features selected of " +
                std::to_string(table.names.size()));
}

void stage_gam(const PipelineConfig& cfg, const Paths& p) {
    auto w = build_topic_workspace(cfg, p, false);
    std::uint64_t base = fnv1a64(hex64(cfg.seed));
    fit_and_report(user_covariate_table(w, cfg), cfg, p.user_table, p.user_model,
                   p.user_selection, p.user_importance, "user", p.gam_dir,
                   fnv1a64("gam.user", base));
    fit_and_report(topic_month_table(w), cfg, p.topic_table, p.topic_model, p.topic_selection,
                   p.topic_importance, "topic", p.gam_dir, fnv1a64("gam.topic", base));
}

void stage_report(const PipelineConfig& cfg, const Paths& p) {
    auto read_json = [](const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open " + path.string());
        return ordered_json::parse(in);
    };

    auto ingest_stats = read_json(p.ingest_stats);
    auto scores = load_scores(p);
    std::size_t n_toxic = 0;
    for (const auto& [id, s] : scores) n_toxic += label_toxic(s);

    auto tweets = load_norm_tweets(p);
    auto window = corpus_window(cfg, tweets);

    auto partisanship = load_partisanship(p);
    auto ca = load_ca_model(p.ca_model.string());
    auto expansion = read_json(p.expansion);
    auto clusters = read_json(p.clusters_json);
    auto topics = read_json(p.topics_json);
    auto waves = read_json(p.waves_json);
    auto assort = read_json(p.assortativity);
    auto user_sel = read_json(p.user_selection);
    auto topic_sel = read_json(p.topic_selection);

    auto correlations = [&](const fs::path& table_path) {
        ordered_json out = ordered_json::object();
        std::ifstream in(table_path);
        if (!in) throw io_error("cannot open " + table_path.string());
        std::string line;
        if (!std::getline(in, line)) throw io_error("empty table: " + table_path.string());
        std::vector<std::string> names;
        std::size_t b = 0;
        for (std::size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                names.push_back(line.substr(b, i - b));
                b = i + 1;
            }
        std::vector<std::vector<double>> cols(names.size());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::size_t c = 0;
            b = 0;
            for (std::size_t i = 0; i <= line.size(); ++i)
                if (i == line.size() || line[i] == ',') {
                    if (c >= names.size()) throw io_error("ragged table: " + table_path.string());
                    cols[c++].push_back(parse_double(line.substr(b, i - b), "table cell"));
                    b = i + 1;
                }
        }
        const auto& y = cols.back();
        for (std::size_t c = 0; c + 1 < names.size(); ++c) {
            ordered_json cell;
            try {
                cell["pearson"] = pearson(cols[c], y);
            } catch (const degenerate_error&) {
                cell["pearson"] = nullptr;
            }
            try {
                cell["kendall_tau"] = kendall_tau(cols[c], y);
            } catch (const degenerate_error&) {
                cell["kendall_tau"] = nullptr;
            }
            out[names[c]] = std::move(cell);
        }
        return out;
    };

    ordered_json topic_summaries = ordered_json::array();
    for (const auto& t : topics["topics"]) {
        ordered_json kws = ordered_json::array();
        std::size_t shown = 0;
        for (const auto& k : t["keywords"]) {
            if (shown++ == 5) break;
            kws.push_back(k["word"]);
        }
        topic_summaries.push_back({{"cluster", t["cluster"]},
                                   {"n_tweets", t["stats"]["n_tweets"]},
                                   {"pct_toxic", t["stats"]["pct_toxic"]},
                                   {"keywords", std::move(kws)},
                                   {"swing", t["monthly"]["swing"]}});
    }

    ordered_json j{
        {"schema", "polarlens/1"},
        {"run_hash", cfg.run_hash()},
        {"seed", cfg.seed},
        {"corpus",
         {{"input_lines", ingest_stats["input_lines"]},
          {"n_tweets", tweets.size()},
          {"rejected", ingest_stats["rejected"]},
          {"n_users", ingest_stats["n_users"]},
          {"pct_toxic",
           scores.empty() ? 0.0 : static_cast<double>(n_toxic) / static_cast<double>(scores.size())}}},
        {"window",
         {{"first_month", month_label(window.first_month)}, {"n_months", window.n_months}}},
        {"ideology",
         {{"n_scored", partisanship.size()},
          {"zmean", ca.zmean},
          {"zstd", ca.zstd},
          {"expanded_conservative", expansion["conservative"]},
          {"expanded_liberal", expansion["liberal"]}}},
        {"clusters", clusters},
        {"topics",
         {{"k_total", topics["k_total"]},
          {"n_reported", topics["topics"].size()},
          {"summaries", std::move(topic_summaries)}}},
        {"waves", {{"n", waves["waves"].size()}, {"cell_shares", waves["cell_shares"]}}},
        {"assortativity", assort},
        {"gam_user", user_sel},
        {"gam_topic", topic_sel},
        {"correlations",
         {{"user", correlations(p.user_table)}, {"topic", correlations(p.topic_table)}}}};
    open_out(p.summary) << j.dump(2) << '\n';
    plog(1, "report: " + p.summary.string());
}

} // namespace

// ---- config ----------------------------------------------------------------

std::string PipelineConfig::run_hash() const {
    return hex64(fnv1a64("#seed=" + std::to_string(seed), fnv1a64(canonical)));
}

namespace {

std::string canon_value(const TomlValue& v) {
    switch (v.kind) {
        case TomlValue::Kind::string: return v.str;
        case TomlValue::Kind::integer: return std::to_string(v.integer);
        case TomlValue::Kind::real: return nlohmann::json(v.real).dump();
        case TomlValue::Kind::boolean: return v.boolean ? "true" : "false";
        case TomlValue::Kind::array: {
            std::string out = "[";
            for (std::size_t i = 0; i < v.array.size(); ++i) {
                if (i) out += ',';
                out += canon_value(v.array[i]);
            }
            return out + "]";
        }
    }
    return {};
}

} // namespace

PipelineConfig config_from_table(const TomlTable& table, const std::string& config_dir) {
    PipelineConfig c;
    for (const auto& [k, v] : table.values()) {
        if (k == "out_dir") continue; // where outputs land does not identify the analysis
        c.canonical += k + "=" + canon_value(v) + "\n";
    }

    std::vector<std::string> missing;
    for (const char* key : {"inputs.tweets", "inputs.users", "inputs.follows", "inputs.elites",
                            "ideology.anchor"})
        if (!table.contains(key)) missing.push_back(key);
    if (!missing.empty()) {
        std::string msg = "missing required config keys:";
        for (const auto& k : missing) msg += " " + k;
        throw config_error(msg);
    }

    std::int64_t seed = table.get_int_or("seed", 0);
    if (seed < 0) throw config_error("seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.out_dir = table.get_string_or("out_dir", "out");

    c.tweets_path = resolve(table.get_string("inputs.tweets"), config_dir);
    c.users_path = resolve(table.get_string("inputs.users"), config_dir);
    c.follows_path = resolve(table.get_string("inputs.follows"), config_dir);
    c.elites_path = resolve(table.get_string("inputs.elites"), config_dir);
    c.embeddings_path = resolve(table.get_string_or("inputs.embeddings", ""), config_dir);
    c.scorer_lexicon_path = resolve(table.get_string_or("inputs.scorer_lexicon", ""), config_dir);
    c.perturbations_path = resolve(table.get_string_or("inputs.perturbations", ""), config_dir);
    if (table.contains("inputs.lang_allow"))
        c.lang_allow = table.get_string_array("inputs.lang_allow");

    c.provider_mode = table.get_string_or("providers.mode", "stub");
    if (c.provider_mode != "stub" && c.provider_mode != "http")
        throw config_error("providers.mode must be \"stub\" or \"http\"");
    c.embedding_dim = static_cast<std::size_t>(table.get_int_or("providers.embedding_dim", 64));
    if (c.embedding_dim == 0) throw config_error("providers.embedding_dim must be positive");
    c.scorer_host = table.get_string_or("providers.scorer_host", "127.0.0.1");
    c.scorer_port = static_cast<int>(table.get_int_or("providers.scorer_port", 0));
    c.embedder_host = table.get_string_or("providers.embedder_host", "127.0.0.1");
    c.embedder_port = static_cast<int>(table.get_int_or("providers.embedder_port", 0));
    c.provider_batch = static_cast<std::size_t>(table.get_int_or("providers.batch_size", 64));
    c.provider_concurrency =
        static_cast<std::size_t>(table.get_int_or("providers.max_concurrency", 4));

    bool has_first = table.contains("window.first_month");
    bool has_n = table.contains("window.n_months");
    if (has_first != has_n)
        throw config_error("window.first_month and window.n_months must be set together");
    if (has_first) {
        c.first_month = month_from_label(table.get_string("window.first_month"));
        c.n_months = static_cast<int>(table.get_int("window.n_months"));
        if (c.n_months < 1) throw config_error("window.n_months must be at least 1");
    }

    c.ca_dims = static_cast<int>(table.get_int_or("ideology.dims", 1));
    if (c.ca_dims < 1) throw config_error("ideology.dims must be at least 1");
    c.anchor = table.get_string("ideology.anchor");
    c.min_follows =
        static_cast<std::size_t>(table.get_int_or("ideology.min_follows", kDefaultMinFollows));
    c.top_pct = table.get_double_or("ideology.top_pct", kDefaultTopPct);
    c.min_elite_followers =
        table.get_int_or("ideology.min_elite_followers", kDefaultMinEliteFollowers);
    c.expand_top_n = static_cast<std::size_t>(table.get_int_or("ideology.expand_top_n", 10));

    c.lambda_dist = table.get_double_or("cluster.lambda_dist", kDefaultLambdaDist);
    c.min_assign_sim = table.get_double_or("cluster.min_assign_sim", kDefaultMinAssignSim);
    c.cluster_batch_size = static_cast<std::size_t>(table.get_int_or("cluster.batch_size", 4096));
    c.cluster_max_iter = static_cast<std::size_t>(table.get_int_or("cluster.max_iter", 100));
    c.spawn_per_batch = table.get_bool_or("cluster.spawn_per_batch", false);

    c.pmi_alpha = table.get_double_or("topics.alpha", kDefaultPmiAlpha);
    c.top_k = static_cast<std::size_t>(table.get_int_or("topics.top_k", 10));
    c.min_topic_size =
        static_cast<std::size_t>(table.get_int_or("topics.min_topic_size", kDefaultMinTopicSize));
    c.wave_majority = table.get_double_or("topics.wave_majority", kDefaultWaveMajority);

    c.restrict_to_known = table.get_bool_or("graph.restrict_to_known", true);
    c.graph_directed = table.get_bool_or("graph.directed", true);
    c.graph_weighted = table.get_bool_or("graph.weighted", true);

    c.gam.degree = static_cast<int>(table.get_int_or("gam.degree", kDefaultSplineDegree));
    c.gam.n_basis = static_cast<int>(table.get_int_or("gam.n_basis", kDefaultNBasis));
    c.gam.min_rows = static_cast<std::size_t>(table.get_int_or("gam.min_rows", 50));
    c.val_frac = table.get_double_or("gam.val_frac", 0.1);
    if (!(c.val_frac >= 0.0 && c.val_frac < 1.0))
        throw config_error("gam.val_frac must be in [0, 1)");
    c.importance_repeats = static_cast<std::size_t>(table.get_int_or("gam.n_repeats", 10));
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path,
                                    const std::vector<std::string>& overrides) {
    TomlTable table = TomlTable::parse_file(path);
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw config_error("override must look like dotted.key=value: \"" + ov + "\"");
        table.set_override(ov.substr(0, eq), ov.substr(eq + 1));
    }
    return config_from_table(table, fs::path(path).parent_path().string());
}

// ---- orchestration ----------------------------------------------------------

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::score: return "score";
        case Stage::ideology: return "ideology";
        case Stage::cluster: return "cluster";
        case Stage::topics: return "topics";
        case Stage::graph: return "graph";
        case Stage::gam: return "gam";
        case Stage::report: return "report";
    }
    return "?";
}

std::vector<Stage> all_stages() {
    return {Stage::ingest, Stage::score, Stage::ideology, Stage::cluster,
            Stage::topics, Stage::graph, Stage::gam,      Stage::report};
}

std::vector<StageRun> run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages,
                                   bool resume) {
    Paths p(config.out_dir);
    for (const char* sub : {"ingest", "score", "ideology", "cluster", "topics", "graph", "gam",
                            "report"})
        fs::create_directories(p.out / sub);

    std::vector<Stage> ordered;
    for (Stage s : all_stages())
        if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);

    std::vector<StageRun> runs;
    for (Stage s : ordered) {
        StageRun run{s, false, 0.0};
        bool have_all = true;
        for (const auto& f : p.stage_outputs(s)) have_all = have_all && fs::exists(f);
        if (resume && have_all) {
            run.skipped = true;
            plog(1, std::string("skipping ") + stage_name(s) + " (outputs exist)");
        } else {
            auto t0 = std::chrono::steady_clock::now();
            switch (s) {
                case Stage::ingest: stage_ingest(config, p); break;
                case Stage::score: stage_score(config, p); break;
                case Stage::ideology: stage_ideology(config, p); break;
                case Stage::cluster: stage_cluster(config, p); break;
                case Stage::topics: stage_topics(config, p); break;
                case Stage::graph: stage_graph(config, p); break;
                case Stage::gam: stage_gam(config, p); break;
                case Stage::report: stage_report(config, p); break;
            }
            run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        runs.push_back(run);
    }

    ordered_json stage_list = ordered_json::array();
    for (const auto& r : runs)
        stage_list.push_back(
            {{"name", stage_name(r.stage)}, {"skipped", r.skipped}, {"seconds", r.seconds}});
    ordered_json manifest{
        {"schema", "polarlens/1"},
        {"tool", "polarlens"},
        {"version", "1.0.0"},
        {"run_hash", config.run_hash()},
        {"seed", config.seed},
        {"generated_at", format_iso8601(UtcTime{static_cast<std::int64_t>(std::time(nullptr))})},
        {"config", config.canonical},
        {"stages", std::move(stage_list)}};
    open_out(p.manifest) << manifest.dump(2) << '\n';
    return runs;
}

} // namespace polarlens
