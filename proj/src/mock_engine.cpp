#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <regex>
#include <set>

#include "dfkg/normalize.hpp"
#include "dfkg/refine.hpp"

namespace dfkg::refine {

namespace {

constexpr std::int64_t kEarliest = 978307200;   // 2001-01-01T00:00:00Z
constexpr std::int64_t kLatest = 1924991999;    // 2030-12-31T23:59:59Z

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Every \xNN escape becomes a single space so that escaped bytes act as delimiters.
std::string strip_escapes(std::string_view v) {
    std::string out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == '\\' && i + 3 < v.size() && v[i + 1] == 'x' && is_hex(v[i + 2]) && is_hex(v[i + 3])) {
            out.push_back(' ');
            i += 3;
            continue;
        }
        out.push_back(v[i]);
    }
    return out;
}

bool has_escape(std::string_view v) { return v.find("\\x") != std::string_view::npos; }

struct Collector {
    const std::string& uid;
    std::vector<RefinedArtifact>& out;
    std::set<std::pair<EntityType, std::string>> seen;

    void add(EntityType type, std::string value, int confidence) {
        value = collapse_whitespace(value);
        if (value.empty()) return;
        if (!seen.emplace(type, value).second) return;
        out.push_back({uid, type, std::move(value), confidence, "mock-rules-v1"});
    }
};

void emails(const std::string& text, Collector& c) {
    static const std::regex re(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})");
    for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
        std::string local_trimmed = it->str();
        while (!local_trimmed.empty() && (local_trimmed.front() == '.' || local_trimmed.front() == '+'))
            local_trimmed.erase(0, 1);
        if (auto n = normalize_value(EntityType::Email, local_trimmed)) c.add(EntityType::Email, *n, 9);
    }
}

void phones(const std::string& text, Collector& c) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '+') continue;
        if (i > 0 && is_digit(text[i - 1])) continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_digit(text[j])) ++j;
        std::size_t n = j - i - 1;
        if (n >= 8 && n <= 15) c.add(EntityType::PhoneNumber, text.substr(i, j - i), 9);
        i = j - 1;
    }
}

void macs(const std::string& text, Collector& c) {
    static const std::regex re(R"((^|[^0-9A-Fa-f:])([0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5})(?![0-9A-Fa-f:]))");
    for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it)
        if (auto n = normalize_value(EntityType::MacAddress, (*it)[2].str())) c.add(EntityType::MacAddress, *n, 10);
}

void timestamps(const std::string& text, const MockOptions& options, Collector& c) {
    for (std::size_t i = 0; i < text.size();) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_digit(text[j])) ++j;
        std::size_t len = j - i;
        bool after_sign = i > 0 && (text[i - 1] == '+' || text[i - 1] == '-' || text[i - 1] == '.');
        bool before_fraction = j < text.size() && text[j] == '.';
        if ((len == 13 || len == 10) && !after_sign && !before_fraction) {
            std::int64_t v = 0;
            std::from_chars(text.data() + i, text.data() + j, v);
            EpochUnit unit = len == 13 ? EpochUnit::Millis : EpochUnit::Seconds;
            std::int64_t seconds = unit == EpochUnit::Millis ? v / 1000 : v;
            if (seconds >= kEarliest && seconds <= kLatest)
                c.add(EntityType::Timestamp, normalize_timestamp(v, unit, options.zone), 8);
        }
        i = j;
    }
}

void app_names(const std::string& text, Collector& c) {
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find_first_of("/ \t\r\n\"',;:=()[]{}", start);
        if (end == std::string::npos) end = text.size();
        std::string_view segment(text.data() + start, end - start);
        if (looks_like_package(segment)) {
            bool mapped = false;
            std::string name = app_name_for_package(segment, &mapped);
            c.add(EntityType::AppName, name, mapped ? 9 : 6);
        }
        start = end + 1;
    }
}

void search_keyword(const std::string& column, const std::string& text, Collector& c) {
    static constexpr std::string_view kSuffix = " - Google Search";
    if (lower(column) != "title") return;
    std::string v = collapse_whitespace(text);
    if (v.size() <= kSuffix.size() || v.compare(v.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) return;
    c.add(EntityType::SearchKeyword, v.substr(0, v.size() - kSuffix.size()), 9);
}

void human_names(const std::string& text, Collector& c) {
    static const std::regex re(R"re((?:^|[^A-Za-z0-9_])(?:fu|u)?ll_name"\s*:\s*"([^"\\]{1,100})")re");
    for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
        std::string name = (*it)[1].str();
        if (std::any_of(name.begin(), name.end(), [](unsigned char ch) { return std::isalpha(ch); }))
            c.add(EntityType::HumanName, name, 7);
    }
}

bool column_in(const std::string& column, std::initializer_list<std::string_view> names) {
    std::string l = lower(column);
    return std::find(names.begin(), names.end(), l) != names.end();
}

void column_rules(const std::string& column, const std::string& raw, Collector& c) {
    if (raw.empty() || has_escape(raw)) return;
    if (column_in(column, {"latitude", "lat"})) {
        if (auto n = normalize_value(EntityType::Latitude, raw); n && *n != "0") c.add(EntityType::Latitude, *n, 6);
    } else if (column_in(column, {"longitude", "lon", "lng"})) {
        if (auto n = normalize_value(EntityType::Longitude, raw); n && *n != "0") c.add(EntityType::Longitude, *n, 6);
    } else if (column_in(column, {"username", "user_name", "screen_name"})) {
        static const std::regex re(R"(^@?[A-Za-z0-9._]{2,30}$)");
        if (std::regex_match(raw, re)) c.add(EntityType::Username, raw[0] == '@' ? raw.substr(1) : raw, 6);
    } else if (column_in(column, {"body", "message"})) {
        if (std::any_of(raw.begin(), raw.end(), [](unsigned char ch) { return std::isalpha(ch); }))
            c.add(EntityType::Message, raw, 6);
    } else if (column_in(column, {"street_address", "formatted_address"})) {
        c.add(EntityType::Address, raw, 5);
    }
}

}  // namespace

std::vector<RefinedArtifact> mock_refine(const flatten::FlatRecord& record, const MockOptions& options) {
    std::vector<RefinedArtifact> out;
    Collector c{record.uid, out, {}};
    for (const auto& [column, value] : record.pairs) {
        if (value.empty()) continue;
        std::string text = strip_escapes(value);
        emails(text, c);
        phones(text, c);
        macs(text, c);
        timestamps(text, options, c);
        app_names(text, c);
        search_keyword(column, text, c);
        human_names(text, c);
        column_rules(column, value, c);
    }
    return out;
}

RefinementEngine::BatchResult MockEngine::refine(const std::vector<flatten::FlatRecord>& batch) {
    BatchResult result;
    for (const auto& r : batch) {
        auto found = mock_refine(r, options_);
        for (auto& a : found) a.engine = id();
        result.artifacts.insert(result.artifacts.end(), std::make_move_iterator(found.begin()),
                                std::make_move_iterator(found.end()));
    }
    return result;
}

}  // namespace dfkg::refine
