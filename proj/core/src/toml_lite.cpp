#include "polarlens/toml_lite.hpp"

#include "polarlens/common.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace polarlens {

namespace {

struct Cursor {
    const std::string* text;
    std::size_t pos = 0;
    std::size_t line = 1;
    const std::string* origin;

    [[noreturn]] void fail(const std::string& msg) const {
        throw config_error(*origin + ":" + std::to_string(line) + ": " + msg);
    }
    bool eof() const { return pos >= text->size(); }
    char peek() const { return (*text)[pos]; }
    char take() {
        char ch = (*text)[pos++];
        if (ch == '\n') ++line;
        return ch;
    }
    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
};

bool is_bare_key_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
}

std::string parse_key_part(Cursor& c) {
    std::string part;
    while (!c.eof() && is_bare_key_char(c.peek())) part.push_back(c.take());
    if (part.empty()) c.fail("expected a key");
    return part;
}

std::string parse_dotted_key(Cursor& c) {
    std::string key = parse_key_part(c);
    for (;;) {
        c.skip_inline_ws();
        if (c.eof() || c.peek() != '.') break;
        c.take();
        c.skip_inline_ws();
        key += '.';
        key += parse_key_part(c);
    }
    return key;
}

std::string parse_basic_string(Cursor& c) {
    c.take(); // opening quote
    std::string out;
    for (;;) {
        if (c.eof()) c.fail("unterminated string");
        char ch = c.take();
        if (ch == '"') return out;
        if (ch == '\n') c.fail("newline inside basic string");
        if (ch != '\\') {
            out.push_back(ch);
            continue;
        }
        if (c.eof()) c.fail("dangling escape");
        char esc = c.take();
        switch (esc) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        default: c.fail(std::string("unsupported escape \\") + esc);
        }
    }
}

TomlValue parse_value(Cursor& c);

TomlValue parse_scalar_token(Cursor& c) {
    std::string tok;
    while (!c.eof()) {
        char ch = c.peek();
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '#' || ch == ',' || ch == ']') break;
        tok.push_back(c.take());
    }
    if (tok.empty()) c.fail("expected a value");
    TomlValue v;
    if (tok == "true" || tok == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.boolean = tok == "true";
        return v;
    }
    bool looks_float = tok.find_first_of(".eE") != std::string::npos &&
                       tok.find_first_not_of("+-0123456789.eE") == std::string::npos;
    if (!looks_float) {
        std::int64_t iv = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
        if (ec == std::errc() && p == tok.data() + tok.size()) {
            v.kind = TomlValue::Kind::integer;
            v.integer = iv;
            return v;
        }
    }
    try {
        std::size_t used = 0;
        double dv = std::stod(tok, &used);
        if (used == tok.size()) {
            v.kind = TomlValue::Kind::real;
            v.real = dv;
            return v;
        }
    } catch (...) {
    }
    c.fail("cannot parse value \"" + tok + "\"");
}

TomlValue parse_value(Cursor& c) {
    c.skip_inline_ws();
    if (c.eof()) c.fail("expected a value");
    char ch = c.peek();
    if (ch == '"') {
        TomlValue v;
        v.kind = TomlValue::Kind::string;
        v.str = parse_basic_string(c);
        return v;
    }
    if (ch == '\'') c.fail("literal strings are not supported; use basic \"...\" strings");
    if (ch == '{') c.fail("inline tables are not supported");
    if (ch == '[') {
        c.take();
        TomlValue v;
        v.kind = TomlValue::Kind::array;
        for (;;) {
            c.skip_inline_ws();
            while (!c.eof() && c.peek() == '\n') {
                c.take();
                c.skip_inline_ws();
            }
            if (c.eof()) c.fail("unterminated array");
            if (c.peek() == ']') {
                c.take();
                return v;
            }
            v.array.push_back(parse_value(c));
            c.skip_inline_ws();
            while (!c.eof() && c.peek() == '\n') {
                c.take();
                c.skip_inline_ws();
            }
            if (c.eof()) c.fail("unterminated array");
            if (c.peek() == ',') {
                c.take();
                continue;
            }
            if (c.peek() == ']') {
                c.take();
                return v;
            }
            c.fail("expected ',' or ']' in array");
        }
    }
    return parse_scalar_token(c);
}

} // namespace

std::string TomlValue::type_name() const {
    switch (kind) {
    case Kind::string: return "string";
    case Kind::integer: return "integer";
    case Kind::real: return "float";
    case Kind::boolean: return "boolean";
    case Kind::array: return "array";
    }
    return "?";
}

TomlTable TomlTable::parse_string(const std::string& text, const std::string& origin) {
    TomlTable table;
    Cursor c{&text, 0, 1, &origin};
    std::string section;
    while (!c.eof()) {
        c.skip_inline_ws();
        if (c.eof()) break;
        char ch = c.peek();
        if (ch == '\n') {
            c.take();
            continue;
        }
        if (ch == '#') {
            while (!c.eof() && c.peek() != '\n') c.take();
            continue;
        }
        if (ch == '[') {
            c.take();
            if (!c.eof() && c.peek() == '[') c.fail("arrays of tables are not supported");
            c.skip_inline_ws();
            section = parse_dotted_key(c);
            c.skip_inline_ws();
            if (c.eof() || c.take() != ']') c.fail("expected ']' after table name");
            c.skip_inline_ws();
            if (!c.eof() && c.peek() == '#')
                while (!c.eof() && c.peek() != '\n') c.take();
            if (!c.eof() && c.peek() != '\n') c.fail("junk after table header");
            continue;
        }
        std::string key = parse_dotted_key(c);
        c.skip_inline_ws();
        if (c.eof() || c.take() != '=') c.fail("expected '=' after key \"" + key + "\"");
        TomlValue v = parse_value(c);
        c.skip_inline_ws();
        if (!c.eof() && c.peek() == '#')
            while (!c.eof() && c.peek() != '\n') c.take();
        if (!c.eof() && c.peek() != '\n') c.fail("junk after value for key \"" + key + "\"");
        std::string full = section.empty() ? key : section + "." + key;
        if (table.values_.count(full)) c.fail("duplicate key \"" + full + "\"");
        table.values_.emplace(std::move(full), std::move(v));
    }
    return table;
}

TomlTable TomlTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

const TomlValue& TomlTable::require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error("missing config key \"" + key + "\"");
    return it->second;
}

std::string TomlTable::get_string(const std::string& key) const {
    const TomlValue& v = require(key);
    if (v.kind != TomlValue::Kind::string)
        throw config_error("config key \"" + key + "\" should be a string, is " + v.type_name());
    return v.str;
}

std::int64_t TomlTable::get_int(const std::string& key) const {
    const TomlValue& v = require(key);
    if (v.kind != TomlValue::Kind::integer)
        throw config_error("config key \"" + key + "\" should be an integer, is " +
                           v.type_name());
    return v.integer;
}

double TomlTable::get_double(const std::string& key) const {
    const TomlValue& v = require(key);
    if (v.kind == TomlValue::Kind::real) return v.real;
    if (v.kind == TomlValue::Kind::integer) return static_cast<double>(v.integer);
    throw config_error("config key \"" + key + "\" should be a number, is " + v.type_name());
}

bool TomlTable::get_bool(const std::string& key) const {
    const TomlValue& v = require(key);
    if (v.kind != TomlValue::Kind::boolean)
        throw config_error("config key \"" + key + "\" should be a boolean, is " +
                           v.type_name());
    return v.boolean;
}

std::vector<std::string> TomlTable::get_string_array(const std::string& key) const {
    const TomlValue& v = require(key);
    if (v.kind != TomlValue::Kind::array)
        throw config_error("config key \"" + key + "\" should be an array, is " + v.type_name());
    std::vector<std::string> out;
    for (const auto& e : v.array) {
        if (e.kind != TomlValue::Kind::string)
            throw config_error("config key \"" + key + "\" should hold strings");
        out.push_back(e.str);
    }
    return out;
}

std::string TomlTable::get_string_or(const std::string& key, const std::string& fallback) const {
    return contains(key) ? get_string(key) : fallback;
}
std::int64_t TomlTable::get_int_or(const std::string& key, std::int64_t fallback) const {
    return contains(key) ? get_int(key) : fallback;
}
double TomlTable::get_double_or(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
}
bool TomlTable::get_bool_or(const std::string& key, bool fallback) const {
    return contains(key) ? get_bool(key) : fallback;
}

void TomlTable::set_override(const std::string& dotted_key, const std::string& raw_value) {
    if (dotted_key.empty()) throw config_error("empty override key");
    std::string origin = "override --" + dotted_key;
    TomlValue v;
    try {
        Cursor c{&raw_value, 0, 1, &origin};
        v = parse_value(c);
        c.skip_inline_ws();
        if (!c.eof()) throw config_error("trailing junk");
    } catch (const config_error&) {
        v.kind = TomlValue::Kind::string; // bare words become strings
        v.str = raw_value;
    }
    values_[dotted_key] = std::move(v);
}

} // namespace polarlens
