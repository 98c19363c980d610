#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polarlens {

/// Minimal TOML subset sufficient for pipeline configs: [section] and
/// [dotted.section] headers, dotted bare keys, basic strings with common
/// escapes, integers, floats, booleans, and flat arrays. Dates, inline
/// tables, arrays of tables and multiline strings are rejected loudly.
struct TomlValue {
    enum class Kind { string, integer, real, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    std::int64_t integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;

    std::string type_name() const;
};

class TomlTable {
public:
    static TomlTable parse_file(const std::string& path);
    static TomlTable parse_string(const std::string& text,
                                  const std::string& origin = "<inline>");

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, TomlValue>& values() const { return values_; }

    std::string get_string(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const; // integers widen
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_string_array(const std::string& key) const;

    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    /// Applies a "dotted.key=value" override; the value is parsed with the
    /// TOML value grammar, falling back to a plain string.
    void set_override(const std::string& dotted_key, const std::string& raw_value);

private:
    const TomlValue& require(const std::string& key) const;
    std::map<std::string, TomlValue> values_;
};

} // namespace polarlens
