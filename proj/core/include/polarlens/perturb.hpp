#ifndef POLARLENS_PERTURB_HPP
#define POLARLENS_PERTURB_HPP

#include "polarlens/corpus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace polarlens {

inline constexpr int kDefaultPerturbations = 9;

/// Emits k rewrites of `text`, each replacing a seeded-random nonempty
/// subset of lexicon-matched tokens with seeded-random variant spellings.
/// Matching is on the lowercased alphanumeric core of each whitespace
/// token; punctuation around the core is preserved. Outputs are pairwise
/// distinct while the combination space allows it; with no matches the
/// original text is returned k times. Deterministic per seed.
std::vector<std::string> perturb(const std::string& text, const PerturbationLexicon& lexicon,
                                 int k, std::uint64_t seed);

} // namespace polarlens

#endif
