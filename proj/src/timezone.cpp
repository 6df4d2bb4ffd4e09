#include "dfkg/timezone.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <map>
#include <mutex>

#include "dfkg/error.hpp"
#include "dfkg/util.hpp"

namespace dfkg::tz {

namespace {

namespace chr = std::chrono;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    return chr::sys_days{chr::year_month_day{chr::year{y}, chr::month{m}, chr::day{d}}}
        .time_since_epoch()
        .count();
}

int year_of_day(std::int64_t days) {
    chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    return static_cast<int>(ymd.year());
}

bool is_leap(int y) { return chr::year{y}.is_leap(); }

class Cursor {
public:
    Cursor(const std::string& bytes, const std::string& zone) : b_(bytes), zone_(zone) {}

    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw Error(ErrorCode::UnknownZone, "truncated TZif data for " + zone_);
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(b_[pos_++]);
    }
    std::int64_t be(std::size_t width) {
        need(width);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i) v = (v << 8) | static_cast<std::uint8_t>(b_[pos_ + i]);
        pos_ += width;
        if (width == 4) return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
        return static_cast<std::int64_t>(v);
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    std::size_t pos() const { return pos_; }
    const std::string& bytes() const { return b_; }

private:
    const std::string& b_;
    const std::string& zone_;
    std::size_t pos_ = 0;
};

struct Counts {
    std::size_t isut, isstd, leap, time, type, chars;
};

Counts read_header(Cursor& c, const std::string& zone, char& version) {
    c.need(44);
    if (c.bytes().compare(c.pos(), 4, "TZif") != 0)
        throw Error(ErrorCode::UnknownZone, "not a TZif file: " + zone);
    c.skip(4);
    version = static_cast<char>(c.u8());
    c.skip(15);
    Counts k{};
    k.isut = static_cast<std::size_t>(c.be(4));
    k.isstd = static_cast<std::size_t>(c.be(4));
    k.leap = static_cast<std::size_t>(c.be(4));
    k.time = static_cast<std::size_t>(c.be(4));
    k.type = static_cast<std::size_t>(c.be(4));
    k.chars = static_cast<std::size_t>(c.be(4));
    return k;
}

// --- POSIX TZ string parsing -------------------------------------------------

class RuleParser {
public:
    explicit RuleParser(const std::string& s) : s_(s) {}

    bool done() const { return i_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[i_]; }
    void expect(char c) {
        if (peek() != c) fail();
        ++i_;
    }
    [[noreturn]] void fail() const { throw Error(ErrorCode::UnknownZone, "malformed TZ rule: " + s_); }

    void name() {
        if (peek() == '<') {
            auto close = s_.find('>', i_);
            if (close == std::string::npos) fail();
            i_ = close + 1;
            return;
        }
        std::size_t start = i_;
        while (!done() && std::isalpha(static_cast<unsigned char>(peek()))) ++i_;
        if (i_ - start < 3) fail();
    }

    int number() {
        if (!std::isdigit(static_cast<unsigned char>(peek()))) fail();
        int v = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) v = v * 10 + (s_[i_++] - '0');
        return v;
    }

    // [+-]hh[:mm[:ss]]
    std::int64_t hms() {
        int sign = 1;
        if (peek() == '+' || peek() == '-') sign = (s_[i_++] == '-') ? -1 : 1;
        std::int64_t v = number() * 3600LL;
        if (peek() == ':') {
            ++i_;
            v += number() * 60LL;
            if (peek() == ':') {
                ++i_;
                v += number();
            }
        }
        return sign * v;
    }

    bool offset_follows() const {
        char c = peek();
        return c == '+' || c == '-' || std::isdigit(static_cast<unsigned char>(c));
    }

    PosixRule::Date date() {
        PosixRule::Date d;
        if (peek() == 'M') {
            ++i_;
            d.kind = PosixRule::Date::Kind::MonthWeekDay;
            d.month = number();
            expect('.');
            d.week = number();
            expect('.');
            d.weekday = number();
            if (d.month < 1 || d.month > 12 || d.week < 1 || d.week > 5 || d.weekday > 6) fail();
        } else if (peek() == 'J') {
            ++i_;
            d.kind = PosixRule::Date::Kind::Julian1;
            d.day = number();
            if (d.day < 1 || d.day > 365) fail();
        } else {
            d.kind = PosixRule::Date::Kind::Julian0;
            d.day = number();
            if (d.day > 365) fail();
        }
        if (peek() == '/') {
            ++i_;
            d.time = hms();
        }
        return d;
    }

private:
    const std::string& s_;
    std::size_t i_ = 0;
};

// Day number (days since epoch) of a rule date in year y.
std::int64_t rule_day(const PosixRule::Date& d, int y) {
    using Kind = PosixRule::Date::Kind;
    std::int64_t jan1 = days_from_civil(y, 1, 1);
    switch (d.kind) {
        case Kind::Julian1: {
            std::int64_t n = d.day - 1;
            if (is_leap(y) && d.day >= 60) ++n;
            return jan1 + n;
        }
        case Kind::Julian0:
            return jan1 + d.day;
        case Kind::MonthWeekDay: {
            std::int64_t first = days_from_civil(y, static_cast<unsigned>(d.month), 1);
            // 1970-01-01 was a Thursday (weekday 4).
            int wd_first = static_cast<int>(((first % 7) + 11) % 7);
            std::int64_t day = first + (d.weekday - wd_first + 7) % 7 + (d.week - 1) * 7;
            unsigned mdays = static_cast<unsigned>(
                (chr::year{y} / chr::month{static_cast<unsigned>(d.month)} / chr::last).day());
            while (day >= first + mdays) day -= 7;
            return day;
        }
    }
    return jan1;
}

}  // namespace

PosixRule PosixRule::parse(const std::string& text) {
    RuleParser p(text);
    PosixRule r;
    p.name();
    r.std_offset = -p.hms();
    if (p.done()) return r;
    r.has_dst = true;
    p.name();
    r.dst_offset = r.std_offset + 3600;
    if (p.offset_follows()) r.dst_offset = -p.hms();
    if (p.done()) {
        // Default US rules when none are given.
        r.start = Date{Date::Kind::MonthWeekDay, 0, 3, 2, 0, 7200};
        r.end = Date{Date::Kind::MonthWeekDay, 0, 11, 1, 0, 7200};
        return r;
    }
    p.expect(',');
    r.start = p.date();
    p.expect(',');
    r.end = p.date();
    if (!p.done()) p.fail();
    return r;
}

std::int64_t PosixRule::offset_at(std::int64_t utc) const {
    if (!has_dst) return std_offset;
    int y = year_of_day(floor_div(utc + std_offset, 86400));
    std::int64_t start_utc = rule_day(start, y) * 86400 + start.time - std_offset;
    std::int64_t end_utc = rule_day(end, y) * 86400 + end.time - dst_offset;
    bool in_dst = (start_utc < end_utc) ? (utc >= start_utc && utc < end_utc)
                                        : (utc < end_utc || utc >= start_utc);
    return in_dst ? dst_offset : std_offset;
}

TimeZone TimeZone::from_tzif(const std::string& name, const std::string& bytes) {
    Cursor c(bytes, name);
    char version = 0;
    Counts k = read_header(c, name, version);
    std::size_t width = 4;
    if (version >= '2') {
        // Skip the 32-bit block; the 64-bit block that follows is authoritative.
        c.skip(k.time * 5 + k.type * 6 + k.chars + k.leap * 8 + k.isstd + k.isut);
        k = read_header(c, name, version);
        width = 8;
    }
    if (k.type == 0) throw Error(ErrorCode::UnknownZone, "TZif without local time types: " + name);

    TimeZone z;
    z.name_ = name;
    z.transitions_.reserve(k.time);
    for (std::size_t i = 0; i < k.time; ++i) z.transitions_.push_back(c.be(width));
    for (std::size_t i = 0; i < k.time; ++i) {
        std::uint8_t t = c.u8();
        if (t >= k.type) throw Error(ErrorCode::UnknownZone, "bad transition type in " + name);
        z.transition_types_.push_back(t);
    }
    for (std::size_t i = 0; i < k.type; ++i) {
        z.type_offsets_.push_back(c.be(4));
        z.type_is_dst_.push_back(c.u8() != 0);
        c.skip(1);
    }
    c.skip(k.chars + k.leap * (width + 4) + k.isstd + k.isut);

    if (width == 8 && c.pos() < bytes.size() && bytes[c.pos()] == '\n') {
        auto end = bytes.find('\n', c.pos() + 1);
        if (end != std::string::npos && end > c.pos() + 1) {
            z.footer_ = PosixRule::parse(bytes.substr(c.pos() + 1, end - c.pos() - 1));
            z.has_footer_ = true;
        }
    }
    return z;
}

std::shared_ptr<const TimeZone> TimeZone::load(const std::string& name) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const TimeZone>> cache;

    if (name.empty() || name.front() == '/' || name.find("..") != std::string::npos)
        throw Error(ErrorCode::UnknownZone, "invalid zone name '" + name + "'");

    std::lock_guard lock(mu);
    if (auto it = cache.find(name); it != cache.end()) return it->second;

    std::string dir = "/usr/share/zoneinfo";
    if (const char* env = std::getenv("TZDIR"); env && *env) dir = env;

    std::shared_ptr<const TimeZone> zone;
    try {
        zone = std::make_shared<const TimeZone>(from_tzif(name, read_file(dir + "/" + name)));
    } catch (const Error& e) {
        if (name == "UTC" || name == "Etc/UTC") {
            TimeZone utc;
            utc.name_ = name;
            utc.type_offsets_ = {0};
            utc.type_is_dst_ = {false};
            zone = std::make_shared<const TimeZone>(std::move(utc));
        } else if (e.code() == ErrorCode::Io) {
            throw Error(ErrorCode::UnknownZone, "unknown zone '" + name + "'");
        } else {
            throw;
        }
    }
    cache.emplace(name, zone);
    return zone;
}

std::int64_t TimeZone::offset_at(std::int64_t utc) const {
    if (transitions_.empty()) return has_footer_ ? footer_.offset_at(utc) : type_offsets_.front();
    if (utc < transitions_.front()) return type_offsets_.front();
    auto it = std::upper_bound(transitions_.begin(), transitions_.end(), utc);
    if (it == transitions_.end() && has_footer_) return footer_.offset_at(utc);
    std::size_t idx = static_cast<std::size_t>(it - transitions_.begin()) - 1;
    return type_offsets_[transition_types_[idx]];
}

}  // namespace dfkg::tz
