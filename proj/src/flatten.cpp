#include "dfkg/flatten.hpp"

#include <charconv>
#include <cmath>

#include "dfkg/csv.hpp"
#include "dfkg/error.hpp"
#include "dfkg/util.hpp"

namespace dfkg::flatten {

std::string uid_prefix(std::string_view device_id, std::string_view file_path,
                       std::string_view database_name) {
    std::string input;
    input.reserve(device_id.size() + file_path.size() + database_name.size());
    input.append(device_id).append(file_path).append(database_name);
    return sha256_hex(input).substr(0, 8);
}

std::string make_uid(const UidParts& p) {
    if (p.device_id.empty() || p.file_path.empty() || p.database_name.empty() || p.table_name.empty())
        throw Error(ErrorCode::InvalidParts, "uid parts must be non-empty");
    if (p.lid < 1) throw Error(ErrorCode::InvalidParts, "lid must be >= 1");
    return uid_prefix(p.device_id, p.file_path, p.database_name) + "_" + p.table_name + "_" +
           std::to_string(p.lid);
}

std::optional<ParsedUid> parse_uid(std::string_view uid) {
    if (uid.size() < 12 || uid[8] != '_') return std::nullopt;
    for (std::size_t i = 0; i < 8; ++i) {
        char c = uid[i];
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return std::nullopt;
    }
    auto last = uid.rfind('_');
    if (last <= 9 || last + 1 >= uid.size()) return std::nullopt;
    std::string_view digits = uid.substr(last + 1);
    if (digits.front() == '0') return std::nullopt;
    ParsedUid out;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out.lid);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || out.lid == 0) return std::nullopt;
    out.prefix = std::string(uid.substr(0, 8));
    out.table = std::string(uid.substr(9, last - 9));
    return out;
}

namespace {

void append_hex_escape(std::string& out, std::uint8_t b) {
    static constexpr char kHex[] = "0123456789abcdef";
    out += "\\x";
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0x0f]);
}

// Length of the valid UTF-8 sequence starting at s[i], or 0.
std::size_t utf8_sequence(std::string_view s, std::size_t i) {
    auto b = [&](std::size_t k) { return static_cast<std::uint8_t>(s[k]); };
    std::uint8_t c = b(i);
    if (c < 0x80) return 1;
    std::size_t len;
    std::uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
        len = 2;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        len = 3;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        len = 4;
        cp = c & 0x07;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        if ((b(i + k) & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b(i + k) & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return len;
}

std::string render_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        std::size_t n = utf8_sequence(s, i);
        if (n == 0) {
            append_hex_escape(out, static_cast<std::uint8_t>(s[i]));
            ++i;
        } else {
            out.append(s.substr(i, n));
            i += n;
        }
    }
    return out;
}

std::string render_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string sanitize(std::string_view s) {
    std::string out;
    for (char c : s) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
                  c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

}  // namespace

std::string render_value(const ingest::Value& value) {
    struct Visitor {
        std::string operator()(std::monostate) const { return {}; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return render_double(v); }
        std::string operator()(const std::string& s) const { return render_text(s); }
        std::string operator()(const ingest::Blob& blob) const {
            std::string out;
            out.reserve(blob.bytes.size());
            for (std::uint8_t b : blob.bytes) {
                if (b >= 0x20 && b <= 0x7e && b != '\\')
                    out.push_back(static_cast<char>(b));
                else
                    append_hex_escape(out, b);
            }
            return out;
        }
    };
    return std::visit(Visitor{}, value);
}

FlatRecord flatten_row(const ingest::DatabaseRef& db, const ingest::RawRow& row) {
    FlatRecord rec;
    rec.database = db.database_name;
    rec.table = row.table_name;
    rec.path = db.file_path;
    rec.lid = row.row_index;
    rec.uid = make_uid({db.device_id, db.file_path, db.database_name, row.table_name, row.row_index});
    rec.pairs.reserve(row.cells.size());
    for (const auto& [column, value] : row.cells) rec.pairs.emplace_back(column, render_value(value));
    return rec;
}

std::vector<FlatRecord> flatten_table(const ingest::DatabaseRef& db, const std::string& table,
                                      const std::vector<ingest::RawRow>& rows) {
    std::vector<FlatRecord> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.table_name != table)
            throw Error(ErrorCode::InvalidInput, "row from table " + row.table_name + " passed for " + table);
        out.push_back(flatten_row(db, row));
    }
    return out;
}

const std::vector<std::string>& default_denylist() {
    static const std::vector<std::string> kDefaults = {
        "com.android.providers.",  "com.android.settings",   "com.android.systemui",
        "com.android.vending",     "com.google.android.gms", "com.google.android.gsf",
        "com.samsung.android.providers.",
    };
    return kDefaults;
}

bool path_denied(std::string_view path, const std::vector<std::string>& denylist) {
    for (const auto& entry : denylist) {
        if (entry.empty()) continue;
        if (entry.front() == '/') {
            if (path.substr(0, entry.size()) == entry) return true;
            continue;
        }
        std::size_t start = 0;
        while (start <= path.size()) {
            std::size_t end = path.find('/', start);
            if (end == std::string_view::npos) end = path.size();
            std::string_view segment = path.substr(start, end - start);
            if (segment.substr(0, entry.size()) == entry) return true;
            start = end + 1;
        }
    }
    return false;
}

std::vector<FlatRecord> unify(const std::vector<FlatRecord>& records, std::uint64_t sample_interval,
                              const std::vector<std::string>& denylist) {
    if (sample_interval < 1) throw Error(ErrorCode::InvalidConfig, "sample interval must be >= 1");
    std::vector<FlatRecord> out;
    std::uint64_t position = 0;
    for (const auto& rec : records) {
        if (path_denied(rec.path, denylist)) continue;
        if (position % sample_interval == 0) out.push_back(rec);
        ++position;
    }
    return out;
}

std::string table_csv_name(const ingest::DatabaseRef& db, const std::string& table) {
    return uid_prefix(db.device_id, db.file_path, db.database_name) + "_" + sanitize(db.database_name) + "_" +
           sanitize(table) + ".csv";
}

std::string table_csv(const std::vector<std::string>& columns, const std::vector<FlatRecord>& records) {
    csv::Row header = {"database", "table", "path", "uid", "lid"};
    header.insert(header.end(), columns.begin(), columns.end());
    std::string out = csv::format_row(header);
    for (const auto& rec : records) {
        csv::Row row = {rec.database, rec.table, rec.path, rec.uid, std::to_string(rec.lid)};
        for (const auto& kv : rec.pairs) row.push_back(kv.second);
        out += csv::format_row(row);
    }
    return out;
}

std::string pairs_json(const FlatRecord& record) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : record.pairs) obj[k] = v;
    return obj.dump();
}

std::string unified_csv(const std::vector<FlatRecord>& records) {
    std::string out = csv::format_row({"database", "table", "path", "uid", "lid", "pairs"});
    for (const auto& rec : records)
        out += csv::format_row(
            {rec.database, rec.table, rec.path, rec.uid, std::to_string(rec.lid), pairs_json(rec)});
    return out;
}

std::vector<FlatRecord> parse_unified_csv(std::string_view text) {
    auto rows = csv::parse(text);
    std::vector<FlatRecord> out;
    if (rows.empty()) return out;
    const csv::Row expected = {"database", "table", "path", "uid", "lid", "pairs"};
    if (rows.front() != expected) throw Error(ErrorCode::InvalidInput, "unexpected unified_records.csv header");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 6)
            throw Error(ErrorCode::InvalidInput, "unified_records.csv line " + std::to_string(i + 1) + ": bad arity");
        FlatRecord rec;
        rec.database = r[0];
        rec.table = r[1];
        rec.path = r[2];
        rec.uid = r[3];
        auto [ptr, ec] = std::from_chars(r[4].data(), r[4].data() + r[4].size(), rec.lid);
        if (ec != std::errc{} || ptr != r[4].data() + r[4].size())
            throw Error(ErrorCode::InvalidInput, "unified_records.csv line " + std::to_string(i + 1) + ": bad lid");
        auto pairs = nlohmann::ordered_json::parse(r[5], nullptr, false);
        if (!pairs.is_object())
            throw Error(ErrorCode::InvalidInput, "unified_records.csv line " + std::to_string(i + 1) + ": bad pairs");
        for (auto& [k, v] : pairs.items()) {
            if (!v.is_string())
                throw Error(ErrorCode::InvalidInput,
                            "unified_records.csv line " + std::to_string(i + 1) + ": non-string value");
            rec.pairs.emplace_back(k, v.get<std::string>());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

RecordIndex::RecordIndex(std::vector<FlatRecord> records) : records_(std::move(records)) {
    by_uid_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        auto [it, inserted] = by_uid_.emplace(records_[i].uid, i);
        if (!inserted) duplicates_.push_back(records_[i].uid);
    }
}

const FlatRecord* RecordIndex::find(std::string_view uid) const {
    auto it = by_uid_.find(std::string(uid));
    return it == by_uid_.end() ? nullptr : &records_[it->second];
}

}  // namespace dfkg::flatten
