#include "dfkg/normalize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>
#include <set>

#include "dfkg/error.hpp"
#include "dfkg/timezone.hpp"

namespace dfkg {

namespace {

namespace chr = std::chrono;

constexpr std::array<std::string_view, 12> kMonths = {
    "January", "February", "March",     "April",   "May",      "June",
    "July",    "August",   "September", "October", "November", "December",
};

// Years 0001 through 9999.
constexpr std::int64_t kMinSeconds = -62135596800LL;
constexpr std::int64_t kMaxSeconds = 253402300799LL;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::string format_civil(std::int64_t local_seconds) {
    std::int64_t days = floor_div(local_seconds, 86400);
    std::int64_t sod = local_seconds - days * 86400;
    chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%02u %s %04d %02d:%02d:%02d", static_cast<unsigned>(ymd.day()),
                  kMonths[static_cast<unsigned>(ymd.month()) - 1].data(), static_cast<int>(ymd.year()),
                  static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60), static_cast<int>(sod % 60));
    return buf;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::optional<std::string> normalize_timestamp_text(const std::string& v) {
    static const std::regex canonical(
        R"(^(\d{2}) (January|February|March|April|May|June|July|August|September|October|November|December) (\d{4}) (\d{2}):(\d{2}):(\d{2})$)");
    static const std::regex iso(R"(^(\d{4})-(\d{2})-(\d{2})[ T](\d{2}):(\d{2}):(\d{2})$)");
    std::smatch m;
    int y, mo, d, h, mi, s;
    if (std::regex_match(v, m, canonical)) {
        d = std::stoi(m[1]);
        mo = static_cast<int>(std::find(kMonths.begin(), kMonths.end(), m[2].str()) - kMonths.begin()) + 1;
        y = std::stoi(m[3]);
        h = std::stoi(m[4]);
        mi = std::stoi(m[5]);
        s = std::stoi(m[6]);
    } else if (std::regex_match(v, m, iso)) {
        y = std::stoi(m[1]);
        mo = std::stoi(m[2]);
        d = std::stoi(m[3]);
        h = std::stoi(m[4]);
        mi = std::stoi(m[5]);
        s = std::stoi(m[6]);
    } else {
        return std::nullopt;
    }
    chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)}, chr::day{static_cast<unsigned>(d)}};
    if (y < 1 || !ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
    std::int64_t days = chr::sys_days{ymd}.time_since_epoch().count();
    return format_civil(days * 86400 + h * 3600 + mi * 60 + s);
}

std::optional<std::string> normalize_coordinate(const std::string& v, double limit) {
    double x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(x) || std::fabs(x) > limit)
        return std::nullopt;
    char buf[64];
    auto [end, ec2] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec2;
    return std::string(buf, end);
}

const std::set<std::string, std::less<>>& package_roots() {
    static const std::set<std::string, std::less<>> kRoots = {
        "com", "org", "net", "io", "tv", "me", "co", "de", "jp", "cn", "kr", "uk",
        "fr",  "ru",  "us",  "app", "info", "edu", "gov", "in", "br", "au", "ca",
    };
    return kRoots;
}

const std::set<std::string, std::less<>>& generic_segments() {
    static const std::set<std::string, std::less<>> kGeneric = {
        "android", "app",  "apps",   "mobile", "client", "lite", "free", "pro",  "main",
        "phone",   "beta", "global", "prod",   "release", "sec", "samsung", "google",
    };
    return kGeneric;
}

}  // namespace

std::string normalize_timestamp(std::int64_t epoch, EpochUnit unit, const std::string& zone) {
    std::int64_t seconds = unit == EpochUnit::Millis ? floor_div(epoch, 1000) : epoch;
    if (seconds < kMinSeconds || seconds > kMaxSeconds)
        throw Error(ErrorCode::OutOfRangeEpoch, std::to_string(epoch));
    auto tzone = tz::TimeZone::load(zone);
    std::int64_t local = seconds + tzone->offset_at(seconds);
    if (local < kMinSeconds || local > kMaxSeconds) throw Error(ErrorCode::OutOfRangeEpoch, std::to_string(epoch));
    return format_civil(local);
}

std::string collapse_whitespace(std::string_view value) {
    std::string out;
    bool pending_space = false;
    for (char c : value) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::optional<std::string> normalize_value(EntityType type, std::string_view raw) {
    std::string v = collapse_whitespace(raw);
    if (v.empty()) return std::nullopt;
    switch (type) {
        case EntityType::Email: {
            static const std::regex re(R"(^[a-z0-9._%+-]+@[a-z0-9-]+(\.[a-z0-9-]+)*\.[a-z]{2,}$)");
            std::string lower = to_lower(v);
            if (!std::regex_match(lower, re)) return std::nullopt;
            return lower;
        }
        case EntityType::PhoneNumber: {
            std::string digits;
            for (char c : v) {
                if (c == ' ' || c == '-' || c == '(' || c == ')' || c == '.') continue;
                digits.push_back(c);
            }
            static const std::regex re(R"(^\+[0-9]{8,15}$)");
            if (!std::regex_match(digits, re)) return std::nullopt;
            return digits;
        }
        case EntityType::MacAddress: {
            std::string upper = to_upper(v);
            std::replace(upper.begin(), upper.end(), '-', ':');
            static const std::regex re(R"(^([0-9A-F]{2}:){5}[0-9A-F]{2}$)");
            if (!std::regex_match(upper, re)) return std::nullopt;
            return upper;
        }
        case EntityType::Timestamp:
            return normalize_timestamp_text(v);
        case EntityType::Latitude:
            return normalize_coordinate(v, 90.0);
        case EntityType::Longitude:
            return normalize_coordinate(v, 180.0);
        case EntityType::AppName:
        case EntityType::Username:
        case EntityType::HumanName:
        case EntityType::SearchKeyword:
        case EntityType::Message:
        case EntityType::Address:
            return v;
    }
    return std::nullopt;
}

std::optional<std::string> known_app_name(std::string_view package) {
    static const std::map<std::string, std::string, std::less<>> kApps = {
        {"com.android.bluetooth", "Bluetooth"},
        {"com.android.chrome", "Chrome"},
        {"com.discord", "Discord"},
        {"com.facebook.katana", "Facebook"},
        {"com.facebook.orca", "Messenger"},
        {"com.google.android.apps.docs", "Google Drive"},
        {"com.google.android.apps.maps", "Google Maps"},
        {"com.google.android.apps.messaging", "Messages"},
        {"com.google.android.apps.photos", "Google Photos"},
        {"com.google.android.gm", "Gmail"},
        {"com.google.android.googlequicksearchbox", "Google"},
        {"com.google.android.youtube", "YouTube"},
        {"com.instagram.android", "Instagram"},
        {"com.samsung.android.messaging", "Samsung Messages"},
        {"com.sec.android.app.myfiles", "My Files"},
        {"com.snapchat.android", "Snapchat"},
        {"com.spotify.music", "Spotify"},
        {"com.twitter.android", "Twitter"},
        {"com.whatsapp", "WhatsApp"},
        {"com.zhiliaoapp.musically", "TikTok"},
        {"org.telegram.messenger", "Telegram"},
        {"org.thoughtcrime.securesms", "Signal"},
    };
    auto it = kApps.find(package);
    if (it == kApps.end()) return std::nullopt;
    return it->second;
}

bool looks_like_package(std::string_view segment) {
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = segment.find('.', start);
        std::string_view part = segment.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (part.empty() || !std::isalpha(static_cast<unsigned char>(part.front()))) return false;
        for (char c : part)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
        if (count == 0 && !package_roots().count(part)) return false;
        ++count;
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return count >= 2;
}

std::string app_name_for_package(std::string_view package, bool* mapped) {
    if (auto known = known_app_name(package)) {
        if (mapped) *mapped = true;
        return *known;
    }
    if (mapped) *mapped = false;
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = package.find('.', start);
        parts.push_back(package.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    std::string_view pick = parts.back();
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (it + 1 == parts.rend()) break;  // never the root
        std::string lower = to_lower(*it);
        if (!generic_segments().count(lower) && !package_roots().count(lower)) {
            pick = *it;
            break;
        }
    }
    std::string name(pick);
    if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    return name;
}

std::optional<std::string> app_name_from_path(std::string_view path) {
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t end = path.find('/', start);
        if (end == std::string_view::npos) end = path.size();
        std::string_view segment = path.substr(start, end - start);
        if (looks_like_package(segment)) return app_name_for_package(segment);
        start = end + 1;
    }
    return std::nullopt;
}

}  // namespace dfkg
