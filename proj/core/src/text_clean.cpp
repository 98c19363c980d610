#include "polarlens/text_clean.hpp"

#include <cctype>
#include <cstdint>

namespace polarlens {

namespace {

bool is_emoji(std::uint32_t cp) {
    return (cp >= 0x1F600 && cp <= 0x1F64F)    // Emoticons
           || (cp >= 0x1F300 && cp <= 0x1F5FF) // Misc Symbols & Pictographs
           || (cp >= 0x1F680 && cp <= 0x1F6FF) // Transport & Map
           || (cp >= 0x1F900 && cp <= 0x1F9FF); // Supplemental Symbols & Pictographs
}

// Decodes one UTF-8 codepoint at s[i]; advances i. Invalid bytes are
// consumed one at a time and returned verbatim so cleaning stays total.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i, std::size_t& len) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t n;
    std::uint32_t cp;
    if (c < 0x80) {
        n = 1;
        cp = c;
    } else if ((c >> 5) == 0x6) {
        n = 2;
        cp = c & 0x1F;
    } else if ((c >> 4) == 0xE) {
        n = 3;
        cp = c & 0x0F;
    } else if ((c >> 3) == 0x1E) {
        n = 4;
        cp = c & 0x07;
    } else {
        len = 1;
        ++i;
        return c;
    }
    if (i + n > s.size()) {
        len = 1;
        ++i;
        return c;
    }
    for (std::size_t k = 1; k < n; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + k]);
        if ((cc >> 6) != 0x2) {
            len = 1;
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    len = n;
    i += n;
    return cp;
}

bool has_prefix_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char a = s[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (a != prefix[i]) return false;
    }
    return true;
}

bool is_url_token(std::string_view tok) {
    return has_prefix_ci(tok, "http://") || has_prefix_ci(tok, "https://") ||
           has_prefix_ci(tok, "www.");
}

bool ascii_lower_alpha(char c) { return c >= 'a' && c <= 'z'; }
bool ascii_upper_alpha(char c) { return c >= 'A' && c <= 'Z'; }

} // namespace

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t b = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > b) out.emplace_back(text.substr(b, i - b));
    }
    return out;
}

std::string clean_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (const std::string& tok : split_tokens(raw)) {
        if (is_url_token(tok)) continue;
        std::string piece;
        piece.reserve(tok.size());
        std::size_t i = 0;
        char prev = '\0';
        while (i < tok.size()) {
            std::size_t len = 0;
            std::size_t at = i;
            std::uint32_t cp = next_codepoint(tok, i, len);
            if (is_emoji(cp)) continue;
            if (cp == '@' || cp == '#') continue;
            if (cp == '_') {
                if (!piece.empty() && piece.back() != ' ') piece.push_back(' ');
                prev = ' ';
                continue;
            }
            if (len == 1) {
                char c = tok[at];
                if (ascii_lower_alpha(prev) && ascii_upper_alpha(c)) piece.push_back(' ');
                piece.push_back(c);
                prev = c;
            } else {
                piece.append(tok.substr(at, len));
                prev = '\0';
            }
        }
        // tokens reduced to nothing (pure emoji, lone '@') vanish entirely
        for (const std::string& sub : split_tokens(piece)) {
            if (!out.empty()) out.push_back(' ');
            out.append(sub);
        }
    }
    return out;
}

std::vector<std::string> extract_mentions(std::string_view raw) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '@') continue;
        std::size_t b = i + 1;
        std::size_t e = b;
        while (e < raw.size() &&
               (std::isalnum(static_cast<unsigned char>(raw[e])) || raw[e] == '_'))
            ++e;
        if (e > b) out.emplace_back(raw.substr(b, e - b));
        i = e - 1;
    }
    return out;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

TokenCore token_core(std::string_view token) {
    TokenCore tc;
    std::size_t b = 0;
    std::size_t e = token.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
    tc.begin = b;
    tc.end = e;
    return tc;
}

std::vector<std::string> word_cores(std::string_view text) {
    std::vector<std::string> out;
    for (const std::string& tok : split_tokens(text)) {
        TokenCore tc = token_core(tok);
        if (tc.end > tc.begin)
            out.push_back(ascii_lower(std::string_view(tok).substr(tc.begin, tc.end - tc.begin)));
    }
    return out;
}

} // namespace polarlens
