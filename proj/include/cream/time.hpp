#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <absl/time/time.h>

namespace cream {

/// An absolute instant with microsecond resolution.
using Instant = std::chrono::sys_time<std::chrono::microseconds>;

/// Wall-clock view of an instant in a particular zone.
struct LocalTime {
    std::chrono::year_month_day date;
    std::chrono::weekday weekday;
    std::int64_t micros_of_day = 0;
    int utc_offset_seconds = 0;

    /// Days since the civil epoch of the local date; differences are calendar-day gaps.
    std::int64_t day_number() const { return std::chrono::sys_days{date}.time_since_epoch().count(); }
};

/// IANA time zone loaded from the system database.
class TimeZone {
public:
    /// Throws Error(InvalidConfig) when the name cannot be resolved.
    static TimeZone load(std::string_view name);
    static TimeZone utc();

    const std::string& name() const { return name_; }
    LocalTime local(Instant t) const;
    /// First instant of the given civil date in this zone.
    Instant start_of_day(std::chrono::year_month_day date) const;

    bool operator==(const TimeZone& other) const { return name_ == other.name_; }

private:
    TimeZone(absl::TimeZone tz, std::string name) : tz_(tz), name_(std::move(name)) {}
    absl::TimeZone tz_;
    std::string name_;

    friend std::string format_rfc3339(Instant, const TimeZone&);
};

std::optional<Instant> parse_rfc3339(std::string_view text);
/// Formats with the zone's local offset; fractional seconds only when non-zero.
std::string format_rfc3339(Instant t, const TimeZone& tz);
std::string format_rfc3339_utc(Instant t);

/// Parses `YYYY-MM-DD`.
std::optional<std::chrono::year_month_day> parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day date);

Instant now_instant();

}  // namespace cream
