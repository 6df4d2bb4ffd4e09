#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace dfkg::tz {

/// A rule-based zone from the POSIX TZ footer of a TZif file, e.g.
/// "EST5EDT,M3.2.0,M11.1.0". Offsets are seconds east of UTC.
struct PosixRule {
    struct Date {
        enum class Kind { Julian1, Julian0, MonthWeekDay } kind = Kind::MonthWeekDay;
        int day = 0;  // Jn / n
        int month = 0, week = 0, weekday = 0;
        std::int64_t time = 7200;  // seconds after local midnight
    };

    std::int64_t std_offset = 0;
    bool has_dst = false;
    std::int64_t dst_offset = 0;
    Date start, end;

    static PosixRule parse(const std::string& text);
    std::int64_t offset_at(std::int64_t utc_seconds) const;
};

/// Compiled zone information loaded from the system tz database.
class TimeZone {
public:
    /// Loads `name` from $TZDIR or /usr/share/zoneinfo. Throws
    /// Error(UnknownZone) for unknown or malformed zones.
    static std::shared_ptr<const TimeZone> load(const std::string& name);

    /// Parses raw TZif bytes (versions 1-4).
    static TimeZone from_tzif(const std::string& name, const std::string& bytes);

    const std::string& name() const { return name_; }

    /// UTC offset in seconds in effect at the given instant.
    std::int64_t offset_at(std::int64_t utc_seconds) const;

private:
    std::string name_;
    std::vector<std::int64_t> transitions_;
    std::vector<std::uint8_t> transition_types_;
    std::vector<std::int64_t> type_offsets_;
    std::vector<bool> type_is_dst_;
    bool has_footer_ = false;
    PosixRule footer_;
};

}  // namespace dfkg::tz
