#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace dfkg::ingest {

/// The 16-byte header every SQLite 3 database file starts with.
inline constexpr char kSqliteMagic[16] = {'S', 'Q', 'L', 'i', 't', 'e', ' ', 'f',
                                          'o', 'r', 'm', 'a', 't', ' ', '3', '\0'};

struct DatabaseRef {
    std::string device_id;
    std::string file_path;      // image-relative directory, "/" separated, leading and trailing "/"
    std::string database_name;  // file name
    std::uint64_t byte_size = 0;
    std::string signature;      // always "sqlite3"
    std::filesystem::path location;  // absolute path on the examiner's machine

    bool operator==(const DatabaseRef&) const = default;
};

void to_json(nlohmann::json& j, const DatabaseRef& ref);
void from_json(const nlohmann::json& j, DatabaseRef& ref);

struct Blob {
    std::vector<std::uint8_t> bytes;
    bool operator==(const Blob&) const = default;
};

/// A raw SQLite cell: NULL, INTEGER, REAL, TEXT or BLOB.
using Value = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;

struct RawRow {
    std::string table_name;
    std::uint64_t row_index = 0;  // 1-based scan ordinal
    std::vector<std::pair<std::string, Value>> cells;
};

struct ScanResult {
    std::vector<DatabaseRef> databases;
    std::vector<std::string> warnings;
};

/// True when `header` starts with the SQLite magic.
bool has_sqlite_magic(std::string_view header);

/// Walks `root` and returns every regular file carrying the SQLite header,
/// whatever its name, ordered by (file_path, database_name). Unreadable files
/// become warnings.
ScanResult scan_image(const std::filesystem::path& root, const std::string& device_id);

/// User tables of `db` in byte order of their names. Throws
/// Error(CorruptDatabase) when the schema cannot be read.
std::vector<std::string> enumerate_tables(const DatabaseRef& db);

struct ReadStats {
    std::uint64_t rows = 0;
    std::uint64_t skipped = 0;
    std::vector<std::string> warnings;
};

/// Streams every row of `table` to `sink` in physical scan order with
/// row_index starting at 1. Throws Error(TableNotFound) for a missing table.
ReadStats read_rows(const DatabaseRef& db, const std::string& table,
                    const std::function<void(RawRow&&)>& sink);

/// Convenience wrapper collecting the stream.
std::vector<RawRow> read_all_rows(const DatabaseRef& db, const std::string& table);

}  // namespace dfkg::ingest
