#include "cream/time.hpp"

#include <cstdio>

#include "cream/error.hpp"

namespace cream {

namespace {

Instant from_absl(absl::Time t) {
    return Instant{std::chrono::microseconds{absl::ToUnixMicros(t)}};
}

absl::Time to_absl(Instant t) {
    return absl::FromUnixMicros(t.time_since_epoch().count());
}

}  // namespace

TimeZone TimeZone::load(std::string_view name) {
    absl::TimeZone tz;
    if (name.empty() || !absl::LoadTimeZone(std::string(name), &tz)) {
        throw Error(ErrorCode::InvalidConfig, "unknown time zone '" + std::string(name) + "'");
    }
    return TimeZone(tz, std::string(name));
}

TimeZone TimeZone::utc() { return TimeZone(absl::UTCTimeZone(), "UTC"); }

LocalTime TimeZone::local(Instant t) const {
    const auto info = tz_.At(to_absl(t));
    const absl::CivilSecond cs = info.cs;
    LocalTime out;
    out.date = std::chrono::year{static_cast<int>(cs.year())} /
               std::chrono::month{static_cast<unsigned>(cs.month())} /
               std::chrono::day{static_cast<unsigned>(cs.day())};
    out.weekday = std::chrono::weekday{std::chrono::sys_days{out.date}};
    const auto sub = absl::ToInt64Microseconds(info.subsecond);
    out.micros_of_day = (static_cast<std::int64_t>(cs.hour()) * 3600 + cs.minute() * 60 + cs.second()) * 1'000'000 + sub;
    out.utc_offset_seconds = info.offset;
    return out;
}

Instant TimeZone::start_of_day(std::chrono::year_month_day date) const {
    const absl::CivilDay day(static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                             static_cast<unsigned>(date.day()));
    return from_absl(tz_.At(absl::CivilSecond(day)).pre);
}

std::optional<Instant> parse_rfc3339(std::string_view text) {
    absl::Time t;
    std::string err;
    if (!absl::ParseTime(absl::RFC3339_full, std::string(text), &t, &err)) return std::nullopt;
    if (t == absl::InfinitePast() || t == absl::InfiniteFuture()) return std::nullopt;
    return from_absl(t);
}

std::string format_rfc3339(Instant t, const TimeZone& tz) {
    const auto micros = t.time_since_epoch().count() % 1'000'000;
    const char* fmt = micros == 0 ? "%Y-%m-%d%ET%H:%M:%S%Ez" : "%Y-%m-%d%ET%H:%M:%E6S%Ez";
    return absl::FormatTime(fmt, to_absl(t), tz.tz_);
}

std::string format_rfc3339_utc(Instant t) {
    auto s = format_rfc3339(t, TimeZone::utc());
    if (s.ends_with("+00:00")) s.replace(s.size() - 6, 6, "Z");
    return s;
}

std::optional<std::chrono::year_month_day> parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (text.size() != 10) return std::nullopt;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

std::string format_date(std::chrono::year_month_day date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

Instant now_instant() {
    return std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::system_clock::now());
}

}  // namespace cream
