#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dfkg/ingest.hpp"

namespace dfkg::flatten {

/// The inputs of a record identifier.
struct UidParts {
    std::string device_id;
    std::string file_path;
    std::string database_name;
    std::string table_name;
    std::uint64_t lid = 0;
};

/// "<8 hex of SHA-256(device_id ‖ file_path ‖ database_name)>_<table>_<lid>".
/// Throws Error(InvalidParts) for an empty field or lid 0.
std::string make_uid(const UidParts& parts);

/// The 8-hex database prefix alone.
std::string uid_prefix(std::string_view device_id, std::string_view file_path,
                       std::string_view database_name);

struct ParsedUid {
    std::string prefix;
    std::string table;
    std::uint64_t lid = 0;
};

/// Splits a uid into its components; nullopt when it is not well formed.
std::optional<ParsedUid> parse_uid(std::string_view uid);

/// One flattened table row: source coordinates plus ordered column values.
struct FlatRecord {
    std::string database;
    std::string table;
    std::string path;
    std::string uid;
    std::uint64_t lid = 0;
    std::vector<std::pair<std::string, std::string>> pairs;

    bool operator==(const FlatRecord&) const = default;
};

/// Renders a raw cell as text: NULL -> "", integers and reals in shortest
/// round-trip decimal, text verbatim (invalid UTF-8 bytes escaped), blobs with
/// printable ASCII kept and every other byte (and '\') as lowercase "\xNN".
std::string render_value(const ingest::Value& value);

FlatRecord flatten_row(const ingest::DatabaseRef& db, const ingest::RawRow& row);

std::vector<FlatRecord> flatten_table(const ingest::DatabaseRef& db, const std::string& table,
                                      const std::vector<ingest::RawRow>& rows);

/// Path exclusions used when no denylist is configured.
const std::vector<std::string>& default_denylist();

/// An entry starting with "/" is an image path prefix; otherwise it must be a
/// prefix of one of the path's segments (package-name form, e.g. "com.android.providers.").
bool path_denied(std::string_view path, const std::vector<std::string>& denylist);

/// Drops denied records, then keeps positions 1, 1+interval, 1+2*interval, ...
/// of the remainder in input order.
std::vector<FlatRecord> unify(const std::vector<FlatRecord>& records, std::uint64_t sample_interval,
                              const std::vector<std::string>& denylist);

// --- serialization -----------------------------------------------------------

/// File name of the per-table export: "<prefix>_<database>_<table>.csv", sanitized.
std::string table_csv_name(const ingest::DatabaseRef& db, const std::string& table);

/// Per-table CSV: header database,table,path,uid,lid,<columns...>.
std::string table_csv(const std::vector<std::string>& columns, const std::vector<FlatRecord>& records);

/// unified_records.csv: database,table,path,uid,lid,pairs with pairs as a JSON object.
std::string unified_csv(const std::vector<FlatRecord>& records);
std::vector<FlatRecord> parse_unified_csv(std::string_view text);

/// Pairs rendered as a JSON object in column order.
std::string pairs_json(const FlatRecord& record);

/// uid -> record lookup.
class RecordIndex {
public:
    RecordIndex() = default;
    explicit RecordIndex(std::vector<FlatRecord> records);

    const FlatRecord* find(std::string_view uid) const;
    const std::vector<FlatRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    /// uids that occur more than once (a hard error for custody).
    const std::vector<std::string>& duplicate_uids() const { return duplicates_; }

private:
    std::vector<FlatRecord> records_;
    std::unordered_map<std::string, std::size_t> by_uid_;
    std::vector<std::string> duplicates_;
};

}  // namespace dfkg::flatten
