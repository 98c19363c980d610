#ifndef POLARLENS_TEXT_CLEAN_HPP
#define POLARLENS_TEXT_CLEAN_HPP

#include <string>
#include <string_view>
#include <vector>

namespace polarlens {

/// Normalizes raw tweet text for embedding and keyword extraction:
///   - drops whitespace-delimited tokens starting with http://, https:// or www.
///   - strips '@' and '#' but keeps the token text that follows them
///   - removes emoji codepoints (Emoticons, Misc Symbols & Pictographs,
///     Transport & Map, Supplemental Symbols & Pictographs blocks)
///   - splits camelCase at lower->upper boundaries and snake_case at '_'
///   - collapses runs of whitespace and trims the ends
/// Total and idempotent.
std::string clean_text(std::string_view raw);

/// @-handles in order of appearance, duplicates kept, '@' stripped.
std::vector<std::string> extract_mentions(std::string_view raw);

/// Whitespace tokenizer.
std::vector<std::string> split_tokens(std::string_view text);

/// Lowercases ASCII letters only; multibyte sequences pass through.
std::string ascii_lower(std::string_view s);

/// Strips leading/trailing non-alphanumeric ASCII. Returns the core and the
/// affix boundaries so a replacement can preserve surrounding punctuation.
struct TokenCore {
    std::size_t begin = 0; // offset of first core byte
    std::size_t end = 0;   // offset one past last core byte
};
TokenCore token_core(std::string_view token);

/// Alphanumeric word cores, lowercased: the vocabulary unit for PMI and the
/// stub toxicity scorer.
std::vector<std::string> word_cores(std::string_view text);

} // namespace polarlens

#endif
