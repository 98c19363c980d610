#include "polarlens/timeutil.hpp"

#include "polarlens/common.hpp"

#include <charconv>
#include <cstdio>

namespace polarlens {

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

int days_in_month(int y, int m) {
    static const int lens[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) return 29;
    return lens[m - 1];
}

int parse_int(std::string_view s, std::size_t pos, std::size_t len, const char* what) {
    if (pos + len > s.size()) throw io_error(std::string("truncated timestamp field: ") + what);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || p != s.data() + pos + len)
        throw io_error(std::string("non-numeric timestamp field: ") + what);
    return v;
}

} // namespace

UtcTime parse_iso8601(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-')
        throw io_error("malformed ISO-8601 date: \"" + std::string(s) + "\"");
    int year = parse_int(s, 0, 4, "year");
    int month = parse_int(s, 5, 2, "month");
    int day = parse_int(s, 8, 2, "day");
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month))
        throw io_error("out-of-range ISO-8601 date: \"" + std::string(s) + "\"");

    std::int64_t secs = days_from_civil(year, month, day) * 86400;
    if (s.size() == 10) return {secs};

    if (s[10] != 'T' && s[10] != ' ')
        throw io_error("malformed ISO-8601 separator: \"" + std::string(s) + "\"");
    if (s.size() < 19 || s[13] != ':' || s[16] != ':')
        throw io_error("malformed ISO-8601 time: \"" + std::string(s) + "\"");
    int hh = parse_int(s, 11, 2, "hour");
    int mm = parse_int(s, 14, 2, "minute");
    int ss = parse_int(s, 17, 2, "second");
    if (hh > 23 || mm > 59 || ss > 60)
        throw io_error("out-of-range ISO-8601 time: \"" + std::string(s) + "\"");
    secs += hh * 3600 + mm * 60 + ss;

    std::size_t rest = 19;
    if (rest < s.size() && s[rest] == '.') {
        ++rest;
        while (rest < s.size() && s[rest] >= '0' && s[rest] <= '9') ++rest;
    }
    if (rest == s.size()) return {secs};
    char sign = s[rest];
    if (sign == 'Z' && rest + 1 == s.size()) return {secs};
    if ((sign == '+' || sign == '-') && rest + 6 == s.size() && s[rest + 3] == ':') {
        int oh = parse_int(s, rest + 1, 2, "offset hour");
        int om = parse_int(s, rest + 4, 2, "offset minute");
        std::int64_t off = oh * 3600 + om * 60;
        secs += (sign == '+') ? -off : off;
        return {secs};
    }
    throw io_error("malformed ISO-8601 offset: \"" + std::string(s) + "\"");
}

std::string format_iso8601(UtcTime t) {
    std::int64_t days = t.epoch_seconds / 86400;
    std::int64_t rem = t.epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                  static_cast<int>(rem % 60));
    return buf;
}

int month_index(UtcTime t) {
    std::int64_t days = t.epoch_seconds / 86400;
    if (t.epoch_seconds % 86400 < 0) --days;
    int y, m, d;
    civil_from_days(days, y, m, d);
    return (y - 1970) * 12 + (m - 1);
}

std::pair<int, int> month_of_index(int idx) {
    int y = 1970 + (idx >= 0 ? idx / 12 : (idx - 11) / 12);
    int m = idx - (y - 1970) * 12 + 1;
    return {y, m};
}

std::string month_label(int idx) {
    auto [y, m] = month_of_index(idx);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", y, m);
    return buf;
}

double years_between(UtcTime from, UtcTime to) {
    double yrs = static_cast<double>(to.epoch_seconds - from.epoch_seconds) / (365.2425 * 86400.0);
    return yrs < 0.0 ? 0.0 : yrs;
}

} // namespace polarlens
