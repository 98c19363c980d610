#include "polarlens/perturb.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"
#include "polarlens/text_clean.hpp"

#include <set>

namespace polarlens {

namespace {

struct MatchSite {
    std::size_t token_index;
    const std::vector<std::string>* variants;
};

} // namespace

std::vector<std::string> perturb(const std::string& text, const PerturbationLexicon& lexicon,
                                 int k, std::uint64_t seed) {
    if (k < 1) throw domain_error("perturb: k must be >= 1");

    std::vector<std::string> tokens = split_tokens(text);
    std::vector<MatchSite> sites;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        TokenCore tc = token_core(tokens[i]);
        if (tc.end <= tc.begin) continue;
        std::string core =
            ascii_lower(std::string_view(tokens[i]).substr(tc.begin, tc.end - tc.begin));
        auto it = lexicon.find(core);
        if (it != lexicon.end()) sites.push_back({i, &it->second});
    }

    if (sites.empty()) return std::vector<std::string>(static_cast<std::size_t>(k), text);

    // Choice per site: 0 = keep, 1..V = variant index. The all-keep tuple is
    // excluded, so the space has prod(V_i + 1) - 1 members.
    double combos = 1.0;
    for (const auto& s : sites) combos *= static_cast<double>(s.variants->size() + 1);
    combos -= 1.0;
    bool want_distinct = combos >= static_cast<double>(k);

    Rng rng(seed);
    std::set<std::vector<std::size_t>> seen;
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(k));
    while (out.size() < static_cast<std::size_t>(k)) {
        std::vector<std::size_t> choice(sites.size());
        bool any = false;
        for (std::size_t s = 0; s < sites.size(); ++s) {
            choice[s] = rng.next_below(sites[s].variants->size() + 1);
            any = any || choice[s] != 0;
        }
        if (!any) continue; // at least one replacement required
        if (want_distinct && !seen.insert(choice).second) continue;

        std::vector<std::string> rebuilt = tokens;
        for (std::size_t s = 0; s < sites.size(); ++s) {
            if (choice[s] == 0) continue;
            std::string& tok = rebuilt[sites[s].token_index];
            TokenCore tc = token_core(tok);
            tok = tok.substr(0, tc.begin) + (*sites[s].variants)[choice[s] - 1] +
                  tok.substr(tc.end);
        }
        std::string joined;
        for (std::size_t i = 0; i < rebuilt.size(); ++i) {
            if (i) joined.push_back(' ');
            joined += rebuilt[i];
        }
        out.push_back(std::move(joined));
    }
    return out;
}

} // namespace polarlens
