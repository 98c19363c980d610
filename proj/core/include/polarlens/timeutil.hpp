#ifndef POLARLENS_TIMEUTIL_HPP
#define POLARLENS_TIMEUTIL_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace polarlens {

/// UTC timestamp as seconds since the Unix epoch. Downstream analytics only
/// ever bucket by calendar month, so second precision is plenty.
struct UtcTime {
    std::int64_t epoch_seconds = 0;

    bool operator==(const UtcTime&) const = default;
    auto operator<=>(const UtcTime&) const = default;
};

/// Parses an ISO-8601 timestamp: "YYYY-MM-DD", optionally followed by
/// "Thh:mm:ss" and a "Z" or "+hh:mm"/"-hh:mm" offset. Throws io_error on
/// malformed input.
UtcTime parse_iso8601(std::string_view s);

std::string format_iso8601(UtcTime t);

/// Months since 1970-01; the bucket key for all time series.
int month_index(UtcTime t);

/// Calendar (year, month 1-12) of a month index.
std::pair<int, int> month_of_index(int idx);

/// "YYYY-MM" label.
std::string month_label(int idx);

/// Fractional years between two instants (365.2425-day years), clamped at 0.
double years_between(UtcTime from, UtcTime to);

} // namespace polarlens

#endif
