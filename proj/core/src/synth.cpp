#include "polarlens/synth.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace polarlens {

namespace {

std::string pad_num(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, v);
    return buf;
}

std::vector<std::vector<float>> orthonormal_centers(std::size_t k, std::size_t dim, Rng& rng) {
    if (k > dim) throw domain_error("synth: need dim >= k for orthonormal centers");
    Eigen::MatrixXd g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.next_gaussian();
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                        Eigen::MatrixXd::Identity(g.rows(), g.cols());
    std::vector<std::vector<float>> centers(k, std::vector<float>(dim));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t e = 0; e < dim; ++e)
            centers[c][e] = static_cast<float>(q(static_cast<Eigen::Index>(e),
                                                 static_cast<Eigen::Index>(c)));
    return centers;
}

std::vector<float> noisy_point(const std::vector<float>& center, double noise, Rng& rng) {
    // noise scales a unit-length direction, so it is the displacement norm,
    // independent of the dimension.
    std::vector<double> g(center.size());
    double norm2 = 0.0;
    for (auto& x : g) {
        x = rng.next_gaussian();
        norm2 += x * x;
    }
    double scale = norm2 > 0.0 ? noise / std::sqrt(norm2) : 0.0;
    std::vector<float> v(center.size());
    for (std::size_t e = 0; e < v.size(); ++e)
        v[e] = static_cast<float>(center[e] + scale * g[e]);
    return v; // EmbeddingMatrix::append renormalizes
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw io_error("cannot write " + p.string());
    return out;
}

const char* kCommonWords[5] = {"the", "and", "with", "about", "from"};
const char* kLexicon[8] = {"gorx", "blemt", "snarv", "quopp", "drazn", "flurk", "vexil", "crubb"};

} // namespace

TwoBlocFollows two_bloc_follows(std::size_t n_users, std::size_t elites_per_side, double p_in,
                                double p_cross, std::uint64_t seed) {
    if (n_users < 2 || elites_per_side < 1)
        throw domain_error("two_bloc_follows: need at least 2 users and 1 elite per side");
    TwoBlocFollows out;
    Rng rng(seed);
    for (std::size_t j = 0; j < elites_per_side; ++j)
        out.elites.push_back("e_r_" + pad_num(j + 1, 2));
    for (std::size_t j = 0; j < elites_per_side; ++j)
        out.elites.push_back("e_l_" + pad_num(j + 1, 2));
    for (std::size_t i = 0; i < n_users; ++i) {
        out.users.push_back("u" + pad_num(i + 1, 4));
        out.user_is_right.push_back(i % 2 == 0);
        for (std::size_t j = 0; j < out.elites.size(); ++j) {
            bool elite_right = j < elites_per_side;
            double p = (elite_right == out.user_is_right[i]) ? p_in : p_cross;
            if (rng.next_double() < p) out.edges.emplace_back(out.users[i], out.elites[j]);
        }
    }
    return out;
}

PlantedBlobs make_blobs(std::size_t n, std::size_t k, std::size_t dim, double noise,
                        std::uint64_t seed) {
    if (n == 0 || k == 0) throw domain_error("make_blobs: need n >= 1 and k >= 1");
    PlantedBlobs out;
    Rng rng(seed);
    Rng r_centers = rng.fork(1);
    Rng r_points = rng.fork(2);
    out.centers = orthonormal_centers(k, dim, r_centers);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t label = static_cast<std::uint32_t>(i % k);
        out.labels.push_back(label);
        auto v = noisy_point(out.centers[label], noise, r_points);
        out.points.append("p" + pad_num(i, 6), v);
    }
    return out;
}

void gen_synthetic(const SynthParams& params, const std::string& out_dir) {
    if (params.n_users < 8) throw domain_error("gen_synthetic: need at least 8 users");
    if (params.n_topics == 0 || params.n_tweets < params.n_topics)
        throw domain_error("gen_synthetic: need n_tweets >= n_topics >= 1");
    if (params.n_wave_topics > params.n_topics)
        throw domain_error("gen_synthetic: n_wave_topics exceeds n_topics");
    if (!(params.wave_share > 0.5 && params.wave_share <= 1.0))
        throw domain_error("gen_synthetic: wave_share must be in (0.5, 1]");
    if (!(params.drift_right_share >= 0.0 && params.drift_right_share <= 1.0))
        throw domain_error("gen_synthetic: drift_right_share must be in [0, 1]");
    if (params.n_months < 2) throw domain_error("gen_synthetic: need at least 2 months");
    if (params.embedding_dim < params.n_topics)
        throw domain_error("gen_synthetic: need embedding_dim >= n_topics");

    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    fs::create_directories(dir);

    Rng master(params.seed);
    Rng r_users = master.fork(1);
    Rng r_follows = master.fork(2);
    Rng r_centers = master.fork(3);
    Rng r_plan = master.fork(4);
    Rng r_embed = master.fork(5);

    // Accounts: regular users first, then seed elites, then expansion candidates.
    struct Account {
        std::string id, handle;
        bool verified = false;
        std::string created;
        std::int64_t followers = 0, following = 0, n_tweets = 0;
    };
    std::vector<Account> accounts;
    std::vector<bool> user_right(params.n_users);
    std::vector<double> propensity(params.n_users);
    std::vector<std::size_t> right_pool, left_pool; // indices into regular users

    for (std::size_t i = 0; i < params.n_users; ++i) {
        Account a;
        a.id = "u" + pad_num(i + 1, 4);
        a.handle = "user" + pad_num(i + 1, 4);
        a.verified = r_users.next_double() < 0.25;
        int year = 2009 + static_cast<int>(r_users.next_below(13));
        int month = 1 + static_cast<int>(r_users.next_below(12));
        a.created = std::to_string(year) + "-" + pad_num(static_cast<std::size_t>(month), 2) + "-01";
        a.followers = std::clamp<std::int64_t>(
            std::llround(std::exp(r_users.next_gaussian() * 1.1 + 5.2)), 1, 5000000);
        a.following = std::clamp<std::int64_t>(
            std::llround(std::exp(r_users.next_gaussian() * 0.9 + 4.7)), 1, 1000000);
        a.n_tweets = std::clamp<std::int64_t>(
            std::llround(std::exp(r_users.next_gaussian() * 1.3 + 6.0)), 1, 2000000);
        user_right[i] = i % 2 == 0;
        (user_right[i] ? right_pool : left_pool).push_back(i);
        double age = 2022.0 - year;
        propensity[i] = std::clamp(0.08 + 0.38 * (a.verified ? 0.0 : 1.0) + 0.028 * age +
                                       0.08 * r_users.next_double(),
                                   0.02, 0.95);
        accounts.push_back(std::move(a));
    }

    std::vector<std::string> elite_ids;
    auto add_special = [&](const char* id_prefix, const char* handle_prefix, std::size_t count,
                           std::int64_t followers_base, bool is_elite) {
        for (std::size_t j = 0; j < count; ++j) {
            Account a;
            a.id = std::string(id_prefix) + pad_num(j + 1, 2);
            a.handle = std::string(handle_prefix) + pad_num(j + 1, 2);
            a.verified = true;
            a.created = "2009-0" + std::to_string(1 + j % 9) + "-01";
            a.followers = followers_base + static_cast<std::int64_t>(j) * 997;
            a.following = 300 + static_cast<std::int64_t>(j) * 7;
            a.n_tweets = 10000 + static_cast<std::int64_t>(j) * 17;
            if (is_elite) elite_ids.push_back(a.id);
            accounts.push_back(std::move(a));
        }
    };
    add_special("e_r_", "elite_r_", params.elites_per_side, 80000, true);
    add_special("e_l_", "elite_l_", params.elites_per_side, 80000, true);
    add_special("c_r_", "cand_r_", params.candidates_per_side, 20000, false);
    add_special("c_l_", "cand_l_", params.candidates_per_side, 20000, false);

    // Follows: regular users over elites then candidates, right side first.
    std::vector<std::pair<std::string, std::string>> follows;
    for (std::size_t i = 0; i < params.n_users; ++i) {
        auto draw_side = [&](const char* prefix, std::size_t count, bool side_right, double p_in,
                             double p_cross) {
            double p = (side_right == user_right[i]) ? p_in : p_cross;
            for (std::size_t j = 0; j < count; ++j)
                if (r_follows.next_double() < p)
                    follows.emplace_back(accounts[i].id, std::string(prefix) + pad_num(j + 1, 2));
        };
        draw_side("e_r_", params.elites_per_side, true, params.p_follow_in, params.p_follow_cross);
        draw_side("e_l_", params.elites_per_side, false, params.p_follow_in, params.p_follow_cross);
        draw_side("c_r_", params.candidates_per_side, true, params.p_candidate_in,
                  params.p_candidate_cross);
        draw_side("c_l_", params.candidates_per_side, false, params.p_candidate_in,
                  params.p_candidate_cross);
    }

    // Topic plan.
    auto centers = orthonormal_centers(params.n_topics, params.embedding_dim, r_centers);
    std::size_t n_nonwave = params.n_topics - params.n_wave_topics;
    std::size_t n_drift_right =
        static_cast<std::size_t>(std::floor(params.drift_right_share * n_nonwave + 1e-9));

    struct TopicPlan {
        std::size_t n = 0;
        bool wave = false;
        bool drift_right = false;      // non-wave topics only
        bool authors_right = false;    // wave topics only
        std::size_t target_user = 0;   // wave topics only
    };
    std::vector<TopicPlan> plan(params.n_topics);
    for (std::size_t t = 0; t < params.n_topics; ++t) {
        plan[t].n = params.n_tweets / params.n_topics + (t < params.n_tweets % params.n_topics);
        plan[t].wave = t >= n_nonwave;
        if (!plan[t].wave) {
            plan[t].drift_right = t < n_drift_right;
        } else {
            std::size_t w = t - n_nonwave;
            plan[t].authors_right = (w % 2) == 0;
            bool target_right = (w / 2) % 2 != 0;
            const auto& pool = target_right ? right_pool : left_pool;
            plan[t].target_user = pool[(11 + 3 * w) % pool.size()];
        }
    }

    // Tweets, topic-major then month-major; one embedding row per tweet.
    struct TweetOut {
        std::string id, user_id, created, text;
        std::size_t topic;
        bool toxic;
    };
    std::vector<TweetOut> tweets;
    tweets.reserve(params.n_tweets);
    EmbeddingMatrix emb;
    std::string topic_word;
    std::size_t global = 0;

    for (std::size_t t = 0; t < params.n_topics; ++t) {
        const auto& tp = plan[t];
        std::size_t slot_in_topic = 0, mentions_so_far = 0;
        std::vector<std::string> scatter;
        for (std::size_t j = 0; j < 3; ++j)
            scatter.push_back(accounts[(7 * t + 13 * j + 1) % params.n_users].handle);
        for (int m = 0; m < params.n_months; ++m) {
            std::size_t s_tm = tp.n / static_cast<std::size_t>(params.n_months) +
                               (static_cast<std::size_t>(m) <
                                tp.n % static_cast<std::size_t>(params.n_months));
            double right_share;
            if (tp.wave) {
                right_share = tp.authors_right ? 0.9 : 0.1;
            } else {
                double frac = static_cast<double>(m) / (params.n_months - 1);
                right_share = tp.drift_right ? 0.2 + 0.6 * frac : 0.8 - 0.6 * frac;
            }
            std::size_t n_right =
                std::min<std::size_t>(static_cast<std::size_t>(std::llround(s_tm * right_share)),
                                      s_tm);

            auto pick = [&](const std::vector<std::size_t>& pool, std::size_t count) {
                std::vector<std::size_t> idx(pool.size());
                for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
                r_plan.shuffle_indices(idx);
                std::vector<std::size_t> out;
                for (std::size_t i = 0; i < idx.size() && out.size() < count; ++i) {
                    std::size_t u = pool[idx[i]];
                    if (tp.wave && u == tp.target_user) continue;
                    out.push_back(u);
                }
                if (out.size() < count)
                    throw domain_error("gen_synthetic: author pool too small for topic slots");
                return out;
            };
            auto authors_r = pick(right_pool, n_right);
            auto authors_l = pick(left_pool, s_tm - n_right);
            std::vector<std::size_t> authors = authors_r;
            authors.insert(authors.end(), authors_l.begin(), authors_l.end());

            int year = params.first_year + (params.first_month - 1 + m) / 12;
            int month = (params.first_month - 1 + m) % 12 + 1;

            for (std::size_t s = 0; s < s_tm; ++s, ++slot_in_topic, ++global) {
                std::size_t author = authors[s];
                bool toxic = tp.wave || r_plan.next_double() < propensity[author];

                std::string text;
                text += kCommonWords[slot_in_topic % 5];
                text += ' ';
                text += kCommonWords[(slot_in_topic + 2) % 5];
                for (std::size_t off : {0u, 3u, 5u}) {
                    topic_word = "topic" + std::to_string(t) + "word" +
                                 std::to_string((slot_in_topic + off) % 8);
                    text += ' ';
                    text += topic_word;
                }
                std::size_t hits = toxic ? 3 : slot_in_topic % 3;
                for (std::size_t h = 0; h < hits; ++h) {
                    text += ' ';
                    text += kLexicon[(slot_in_topic + h) % 8];
                }
                if (tp.wave) {
                    if (mentions_so_far + 1 <=
                        params.wave_share * static_cast<double>(slot_in_topic + 1) + 1e-9) {
                        ++mentions_so_far;
                        text += " @" + accounts[tp.target_user].handle;
                    }
                } else if (slot_in_topic % 2 == 0) {
                    text += " @" + scatter[(slot_in_topic / 2) % 3];
                }

                char stamp[40];
                std::snprintf(stamp, sizeof stamp, "%04d-%02d-%02dT%02d:%02d:%02dZ", year, month,
                              static_cast<int>(1 + global % 28), static_cast<int>(global % 24),
                              static_cast<int>((global * 7) % 60),
                              static_cast<int>((global * 13) % 60));

                TweetOut tw;
                tw.id = "t" + pad_num(global + 1, 6);
                tw.user_id = accounts[author].id;
                tw.created = stamp;
                tw.text = std::move(text);
                tw.topic = t;
                tw.toxic = toxic;
                emb.append(tw.id, noisy_point(centers[t], params.blob_noise, r_embed));
                tweets.push_back(std::move(tw));
            }
        }
    }

    // Emit files.
    {
        auto out = open_out(dir / "tweets.jsonl");
        for (const auto& tw : tweets) {
            nlohmann::ordered_json j{{"id", tw.id},
                                     {"user_id", tw.user_id},
                                     {"created_at", tw.created},
                                     {"text", tw.text}};
            out << j.dump() << '\n';
        }
    }
    {
        auto out = open_out(dir / "users.csv");
        out << "id,handle,verified,created_at,followers,following,n_tweets\n";
        for (const auto& a : accounts)
            out << a.id << ',' << a.handle << ',' << (a.verified ? "true" : "false") << ','
                << a.created << ',' << a.followers << ',' << a.following << ',' << a.n_tweets
                << '\n';
    }
    {
        auto out = open_out(dir / "follows.csv");
        out << "user_id,elite_id\n";
        for (const auto& [u, e] : follows) out << u << ',' << e << '\n';
    }
    {
        auto out = open_out(dir / "elites.txt");
        for (const auto& id : elite_ids) out << id << '\n';
    }
    {
        auto out = open_out(dir / "scorer_lexicon.txt");
        out << "# synthetic toxicity lexicon\n";
        for (const char* w : kLexicon) out << w << '\n';
    }
    {
        auto out = open_out(dir / "perturbations.tsv");
        out << "the\tteh\tthhe\n";
        out << "and\tnad\ta nd\n";
        out << "about\tab0ut\tabuot\n";
    }
    save_embeddings((dir / "embeddings.bin").string(), (dir / "embeddings.ids").string(), emb);

    {
        nlohmann::ordered_json truth;
        truth["schema"] = "polarlens/1";
        truth["seed"] = params.seed;
        truth["params"] = {{"n_users", params.n_users},
                           {"elites_per_side", params.elites_per_side},
                           {"candidates_per_side", params.candidates_per_side},
                           {"p_follow_in", params.p_follow_in},
                           {"p_follow_cross", params.p_follow_cross},
                           {"n_tweets", params.n_tweets},
                           {"n_topics", params.n_topics},
                           {"n_wave_topics", params.n_wave_topics},
                           {"wave_share", params.wave_share},
                           {"drift_right_share", params.drift_right_share},
                           {"embedding_dim", params.embedding_dim},
                           {"blob_noise", params.blob_noise},
                           {"n_months", params.n_months}};
        auto users = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < params.n_users; ++i)
            users.push_back({{"id", accounts[i].id},
                             {"bloc", user_right[i] ? "right" : "left"},
                             {"propensity", propensity[i]}});
        truth["users"] = std::move(users);
        auto topics = nlohmann::ordered_json::array();
        auto waves = nlohmann::ordered_json::array();
        for (std::size_t t = 0; t < params.n_topics; ++t) {
            nlohmann::ordered_json tj{{"topic", t},
                                      {"n_tweets", plan[t].n},
                                      {"wave", plan[t].wave}};
            if (plan[t].wave) {
                tj["drift"] = nullptr;
                tj["target_handle"] = accounts[plan[t].target_user].handle;
                tj["authors"] = plan[t].authors_right ? "right" : "left";
                waves.push_back({{"topic", t},
                                 {"target_handle", accounts[plan[t].target_user].handle}});
            } else {
                tj["drift"] = plan[t].drift_right ? "right" : "left";
                tj["target_handle"] = nullptr;
                tj["authors"] = nullptr;
            }
            topics.push_back(std::move(tj));
        }
        truth["topics"] = std::move(topics);
        truth["waves"] = std::move(waves);
        auto tw = nlohmann::ordered_json::array();
        for (const auto& twt : tweets)
            tw.push_back({{"id", twt.id}, {"topic", twt.topic}, {"toxic", twt.toxic}});
        truth["tweets"] = std::move(tw);
        auto out = open_out(dir / "truth.json");
        out << truth.dump(2) << '\n';
    }

    {
        auto out = open_out(dir / "config.toml");
        out << "# generated alongside the synthetic corpus\n";
        out << "seed = " << params.seed << "\n\n";
        out << "[inputs]\n";
        out << "tweets = \"tweets.jsonl\"\n";
        out << "users = \"users.csv\"\n";
        out << "follows = \"follows.csv\"\n";
        out << "elites = \"elites.txt\"\n";
        out << "embeddings = \"embeddings.bin\"\n";
        out << "scorer_lexicon = \"scorer_lexicon.txt\"\n\n";
        out << "[providers]\n";
        out << "mode = \"stub\"\n";
        out << "embedding_dim = " << params.embedding_dim << "\n\n";
        out << "[ideology]\n";
        out << "dims = 1\n";
        out << "anchor = \"e_r_01\"\n";
        out << "min_follows = 10\n";
        out << "top_pct = 0.2\n";
        out << "min_elite_followers = 30\n";
        out << "expand_top_n = " << params.candidates_per_side << "\n\n";
        out << "[cluster]\n";
        out << "lambda_dist = 0.4\n";
        out << "min_assign_sim = 0.6\n";
        out << "batch_size = 4096\n";
        out << "max_iter = 100\n\n";
        out << "[topics]\n";
        out << "alpha = 1.0\n";
        out << "top_k = 10\n";
        out << "min_topic_size = 50\n";
        out << "wave_majority = 0.5\n\n";
        out << "[graph]\n";
        out << "restrict_to_known = true\n";
        out << "directed = true\n";
        out << "weighted = true\n\n";
        out << "[gam]\n";
        out << "n_basis = 8\n";
        out << "degree = 3\n";
        out << "val_frac = 0.1\n";
        out << "n_repeats = 10\n";
    }
}

} // namespace polarlens
