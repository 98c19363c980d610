#include "polarlens/corpus.hpp"

#include "polarlens/common.hpp"
#include "polarlens/text_clean.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>

namespace polarlens {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw error(std::string("missing field ") + key);
    if (!it->is_string()) throw error(std::string("field ") + key + " is not a string");
    return it->get<std::string>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t b = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.emplace_back(line.substr(b, i - b));
            b = i + 1;
        }
    }
    return out;
}

std::int64_t parse_nonneg(const std::string& s, const char* what) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0)
        throw io_error(std::string("bad nonnegative integer for ") + what + ": \"" + s + "\"");
    return v;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace

LanguagePredicate accept_all_languages() {
    return [](const Tweet&) { return true; };
}

TweetLoadResult load_tweets(const std::string& path, const LanguagePredicate& lang_ok) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open tweets file: " + path);

    TweetLoadResult result;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) {
            result.rejects.push_back({lineno, "empty line"});
            continue;
        }
        try {
            json j = json::parse(line);
            if (!j.is_object()) throw error("line is not a JSON object");
            Tweet t;
            t.id = require_string(j, "id");
            t.user_id = require_string(j, "user_id");
            t.created_at = parse_iso8601(require_string(j, "created_at"));
            t.raw_text = require_string(j, "text");
            t.clean_text = clean_text(t.raw_text);
            if (auto it = j.find("mentions"); it != j.end() && it->is_array()) {
                for (const auto& m : *it) {
                    if (!m.is_string()) throw error("mentions entry is not a string");
                    t.mentions.push_back(m.get<std::string>());
                }
            } else {
                t.mentions = extract_mentions(t.raw_text);
            }
            if (auto it = j.find("toxicity"); it != j.end() && !it->is_null()) {
                if (!it->is_number()) throw error("toxicity is not a number");
                double v = it->get<double>();
                if (v < 0.0 || v > 1.0) throw error("toxicity outside [0,1]");
                t.toxicity = v;
            }
            if (auto it = j.find("lang"); it != j.end() && it->is_string())
                t.lang = it->get<std::string>();
            if (!lang_ok(t)) {
                result.rejects.push_back({lineno, "language filtered"});
                continue;
            }
            result.tweets.push_back(std::move(t));
        } catch (const json::exception&) {
            result.rejects.push_back({lineno, "invalid JSON"});
        } catch (const std::exception& e) {
            result.rejects.push_back({lineno, e.what()});
        }
    }
    result.input_lines = lineno;
    return result;
}

std::vector<UserProfile> load_users(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open users file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw io_error("users file is empty: " + path);
    if (strip_cr(line) != "id,handle,verified,created_at,followers,following,n_tweets")
        throw io_error("unexpected users.csv header: \"" + line + "\"");

    std::vector<UserProfile> users;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 7)
            throw io_error("users.csv line " + std::to_string(lineno) + ": expected 7 fields, got " +
                           std::to_string(f.size()));
        UserProfile u;
        u.id = f[0];
        u.handle = f[1];
        if (f[2] == "true")
            u.verified = true;
        else if (f[2] == "false")
            u.verified = false;
        else
            throw io_error("users.csv line " + std::to_string(lineno) + ": verified must be true/false");
        u.created_at = parse_iso8601(f[3]);
        u.followers = parse_nonneg(f[4], "followers");
        u.following = parse_nonneg(f[5], "following");
        u.n_tweets = parse_nonneg(f[6], "n_tweets");
        users.push_back(std::move(u));
    }
    return users;
}

PerturbationLexicon load_perturbation_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open perturbation lexicon: " + path);

    PerturbationLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t b = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == '\t') {
                fields.emplace_back(line.substr(b, i - b));
                b = i + 1;
            }
        }
        if (fields.size() < 2)
            throw io_error("perturbations.tsv line " + std::to_string(lineno) +
                           ": need key and at least one variant");
        std::string key = fields[0];
        if (key != ascii_lower(key))
            throw io_error("perturbations.tsv line " + std::to_string(lineno) +
                           ": key must be lowercase: \"" + key + "\"");
        std::vector<std::string> variants(fields.begin() + 1, fields.end());
        for (const auto& v : variants)
            if (v == key)
                throw io_error("perturbations.tsv line " + std::to_string(lineno) +
                               ": variant equals key: \"" + v + "\"");
        lex[key] = std::move(variants);
    }
    return lex;
}

bool label_toxic(double toxicity) {
    if (toxicity < 0.0 || toxicity > 1.0)
        throw domain_error("toxicity outside [0,1]: " + std::to_string(toxicity));
    return toxicity > 0.5;
}

void write_rejects_report(const std::string& path, const std::vector<Reject>& rejects) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rejects) arr.push_back({{"line", r.line}, {"reason", r.reason}});
    std::ofstream out(path);
    if (!out) throw io_error("cannot write rejects report: " + path);
    out << arr.dump(2) << '\n';
}

UserLookup::UserLookup(const std::vector<UserProfile>& users) : users_(&users) {
    for (std::size_t i = 0; i < users.size(); ++i) {
        id_idx_.emplace(users[i].id, i);
        handle_idx_.emplace(ascii_lower(users[i].handle), i);
    }
}

const UserProfile* UserLookup::by_id(const std::string& id) const {
    auto it = id_idx_.find(id);
    return it == id_idx_.end() ? nullptr : &(*users_)[it->second];
}

const UserProfile* UserLookup::by_handle(const std::string& handle) const {
    auto it = handle_idx_.find(ascii_lower(handle));
    return it == handle_idx_.end() ? nullptr : &(*users_)[it->second];
}

} // namespace polarlens
