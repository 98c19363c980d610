#ifndef POLARLENS_CORPUS_HPP
#define POLARLENS_CORPUS_HPP

#include "polarlens/timeutil.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polarlens {

struct Tweet {
    std::string id;
    std::string user_id;
    UtcTime created_at;
    std::string raw_text;
    std::string clean_text;
    std::vector<std::string> mentions; // @-handles from raw_text, in order, dups kept
    std::optional<double> toxicity;    // in [0,1] when present
    std::optional<std::string> lang;
};

struct UserProfile {
    std::string id;
    std::string handle;
    bool verified = false;
    UtcTime created_at;
    std::int64_t followers = 0;
    std::int64_t following = 0;
    std::int64_t n_tweets = 0;
    std::optional<double> partisanship; // z-score, filled by the ideology stage

    double years_active(UtcTime analysis_date) const {
        return years_between(created_at, analysis_date);
    }
};

/// lowercase word -> nonempty list of variant spellings
using PerturbationLexicon = std::map<std::string, std::vector<std::string>>;

struct Reject {
    std::size_t line = 0; // 1-based input line
    std::string reason;
};

struct TweetLoadResult {
    std::vector<Tweet> tweets;
    std::vector<Reject> rejects;
    std::size_t input_lines = 0;
};

/// Accept-all placeholder; swap in a real language identifier if one exists.
using LanguagePredicate = std::function<bool(const Tweet&)>;
LanguagePredicate accept_all_languages();

/// Reads one JSON object per line: {id, user_id, created_at, text,
/// mentions?, toxicity?, lang?}. Malformed lines become per-line rejects;
/// an unreadable file throws io_error. clean_text and mentions are
/// populated here. Order is preserved.
TweetLoadResult load_tweets(const std::string& path,
                            const LanguagePredicate& lang_ok = accept_all_languages());

/// users.csv: header id,handle,verified,created_at,followers,following,n_tweets
std::vector<UserProfile> load_users(const std::string& path);

/// perturbations.tsv: key<TAB>variant1<TAB>variant2...
PerturbationLexicon load_perturbation_lexicon(const std::string& path);

/// Strict threshold: toxic iff t > 0.5. Throws domain_error outside [0,1].
bool label_toxic(double toxicity);

/// Index over a loaded user table. Handles resolve case-insensitively.
class UserLookup {
public:
    explicit UserLookup(const std::vector<UserProfile>& users);
    const UserProfile* by_id(const std::string& id) const;
    const UserProfile* by_handle(const std::string& handle) const;

private:
    const std::vector<UserProfile>* users_;
    std::map<std::string, std::size_t> id_idx_;
    std::map<std::string, std::size_t> handle_idx_;
};

void write_rejects_report(const std::string& path, const std::vector<Reject>& rejects);

} // namespace polarlens

#endif
