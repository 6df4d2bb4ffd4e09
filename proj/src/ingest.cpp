#include "dfkg/ingest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <fstream>

#include "dfkg/error.hpp"
#include "dfkg/sqlite.hpp"

namespace dfkg {

namespace sqlite {

namespace {

std::string uri_escape(const std::string& path) {
    std::string out;
    for (char c : path) {
        if (c == '%' || c == '?' || c == '#') {
            static constexpr char kHex[] = "0123456789ABCDEF";
            out.push_back('%');
            out.push_back(kHex[(static_cast<unsigned char>(c) >> 4) & 0xf]);
            out.push_back(kHex[static_cast<unsigned char>(c) & 0xf]);
        } else {
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

Connection Connection::open_evidence(const std::filesystem::path& path) {
    // immutable=1: no locks, no journal or WAL access, nothing written next to the evidence.
    std::string uri = "file:" + uri_escape(std::filesystem::absolute(path).string()) + "?mode=ro&immutable=1";
    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(uri.c_str(), &db, SQLITE_OPEN_READONLY | SQLITE_OPEN_URI, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : sqlite3_errstr(rc);
        sqlite3_close(db);
        throw Error(ErrorCode::CorruptDatabase, path.string() + ": " + msg);
    }
    return Connection(db);
}

Connection Connection::open_writable(const std::filesystem::path& path) {
    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(path.string().c_str(), &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE,
                             nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : sqlite3_errstr(rc);
        sqlite3_close(db);
        throw Error(ErrorCode::Io, path.string() + ": " + msg);
    }
    return Connection(db);
}

Connection& Connection::operator=(Connection&& other) noexcept {
    if (this != &other) {
        sqlite3_close(db_);
        db_ = other.db_;
        other.db_ = nullptr;
    }
    return *this;
}

Connection::~Connection() { sqlite3_close(db_); }

void Connection::exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw Error(ErrorCode::Io, "sqlite exec failed: " + msg);
    }
}

std::string Connection::last_error() const { return db_ ? sqlite3_errmsg(db_) : "no connection"; }

Statement::Statement(const Connection& conn, const std::string& sql) {
    prepare_code_ = sqlite3_prepare_v2(conn.get(), sql.c_str(), -1, &stmt_, nullptr);
    if (prepare_code_ != SQLITE_OK) {
        sqlite3_finalize(stmt_);
        stmt_ = nullptr;
    }
}

Statement::~Statement() { sqlite3_finalize(stmt_); }

void Statement::bind_text(int idx, std::string_view v) {
    sqlite3_bind_text(stmt_, idx, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
}
void Statement::bind_int(int idx, std::int64_t v) { sqlite3_bind_int64(stmt_, idx, v); }
void Statement::bind_real(int idx, double v) { sqlite3_bind_double(stmt_, idx, v); }
void Statement::bind_blob(int idx, const std::vector<std::uint8_t>& v) {
    sqlite3_bind_blob(stmt_, idx, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
}
void Statement::bind_null(int idx) { sqlite3_bind_null(stmt_, idx); }
void Statement::reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace sqlite

namespace ingest {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const DatabaseRef& ref) {
    j = nlohmann::json{{"device_id", ref.device_id},         {"file_path", ref.file_path},
                       {"database_name", ref.database_name}, {"byte_size", ref.byte_size},
                       {"signature", ref.signature},         {"location", ref.location.string()}};
}

void from_json(const nlohmann::json& j, DatabaseRef& ref) {
    j.at("device_id").get_to(ref.device_id);
    j.at("file_path").get_to(ref.file_path);
    j.at("database_name").get_to(ref.database_name);
    j.at("byte_size").get_to(ref.byte_size);
    j.at("signature").get_to(ref.signature);
    ref.location = j.value("location", std::string{});
}

bool has_sqlite_magic(std::string_view header) {
    return header.size() >= sizeof(kSqliteMagic) &&
           std::equal(std::begin(kSqliteMagic), std::end(kSqliteMagic), header.begin());
}

namespace {

bool is_sidecar(const std::string& name) {
    for (std::string_view suffix : {"-wal", "-shm", "-journal"}) {
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            return true;
    }
    return false;
}

std::string image_dir(const fs::path& rel_parent) {
    std::string dir = rel_parent.generic_string();
    if (dir.empty()) return "/";
    return "/" + dir + "/";
}

}  // namespace

ScanResult scan_image(const fs::path& root, const std::string& device_id) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error(ErrorCode::RootNotFound, root.string());

    ScanResult result;
    const fs::path base = fs::canonical(root);
    fs::recursive_directory_iterator it(base, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw Error(ErrorCode::RootNotFound, root.string() + ": " + ec.message());

    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) {
            result.warnings.push_back("walk error: " + ec.message());
            ec.clear();
            continue;
        }
        const auto& entry = *it;
        std::error_code st;
        if (entry.is_symlink(st) || !entry.is_regular_file(st)) continue;
        const std::string name = entry.path().filename().string();
        if (is_sidecar(name)) continue;

        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) {
            result.warnings.push_back("unreadable file: " + entry.path().string());
            continue;
        }
        std::array<char, sizeof(kSqliteMagic)> header{};
        in.read(header.data(), header.size());
        if (in.gcount() != static_cast<std::streamsize>(header.size())) continue;
        if (!has_sqlite_magic(std::string_view(header.data(), header.size()))) continue;

        DatabaseRef ref;
        ref.device_id = device_id;
        ref.file_path = image_dir(fs::relative(entry.path(), base).parent_path());
        ref.database_name = name;
        ref.byte_size = entry.file_size(st);
        ref.signature = "sqlite3";
        ref.location = entry.path();
        result.databases.push_back(std::move(ref));
    }

    std::sort(result.databases.begin(), result.databases.end(), [](const auto& a, const auto& b) {
        return std::tie(a.file_path, a.database_name) < std::tie(b.file_path, b.database_name);
    });
    for (const auto& w : result.warnings) spdlog::warn("scan: {}", w);
    return result;
}

std::vector<std::string> enumerate_tables(const DatabaseRef& db) {
    auto conn = sqlite::Connection::open_evidence(db.location);
    sqlite::Statement stmt(conn,
                           "SELECT name FROM sqlite_master WHERE type = 'table' "
                           "AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY name");
    if (!stmt.ok())
        throw Error(ErrorCode::CorruptDatabase, db.location.string() + ": " + conn.last_error());
    std::vector<std::string> tables;
    int rc;
    while ((rc = stmt.step()) == SQLITE_ROW) {
        const auto* text = sqlite3_column_text(stmt.get(), 0);
        tables.emplace_back(text ? reinterpret_cast<const char*>(text) : "");
    }
    if (rc != SQLITE_DONE)
        throw Error(ErrorCode::CorruptDatabase, db.location.string() + ": " + conn.last_error());
    return tables;
}

ReadStats read_rows(const DatabaseRef& db, const std::string& table,
                    const std::function<void(RawRow&&)>& sink) {
    auto conn = sqlite::Connection::open_evidence(db.location);
    {
        sqlite::Statement probe(conn, "SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = ?");
        if (!probe.ok())
            throw Error(ErrorCode::CorruptDatabase, db.location.string() + ": " + conn.last_error());
        probe.bind_text(1, table);
        if (probe.step() != SQLITE_ROW)
            throw Error(ErrorCode::TableNotFound, db.database_name + ": " + table);
    }

    sqlite::Statement stmt(conn, "SELECT * FROM " + sqlite::quote_identifier(table));
    if (!stmt.ok())
        throw Error(ErrorCode::CorruptDatabase, db.location.string() + ": " + conn.last_error());

    const int ncols = sqlite3_column_count(stmt.get());
    std::vector<std::string> columns;
    columns.reserve(static_cast<std::size_t>(ncols));
    for (int c = 0; c < ncols; ++c) columns.emplace_back(sqlite3_column_name(stmt.get(), c));

    ReadStats stats;
    std::uint64_t index = 0;
    while (true) {
        int rc = stmt.step();
        if (rc == SQLITE_DONE) break;
        if (rc != SQLITE_ROW) {
            // The cursor cannot advance past a damaged page; the remainder is lost.
            ++stats.skipped;
            stats.warnings.push_back(db.database_name + "/" + table + ": row after index " +
                                     std::to_string(index) + " unreadable: " + conn.last_error());
            break;
        }
        RawRow row;
        row.table_name = table;
        row.row_index = ++index;
        row.cells.reserve(columns.size());
        for (int c = 0; c < ncols; ++c) {
            sqlite3_stmt* s = stmt.get();
            Value v;
            switch (sqlite3_column_type(s, c)) {
                case SQLITE_INTEGER: v = static_cast<std::int64_t>(sqlite3_column_int64(s, c)); break;
                case SQLITE_FLOAT: v = sqlite3_column_double(s, c); break;
                case SQLITE_TEXT: {
                    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(s, c));
                    v = std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(s, c)));
                    break;
                }
                case SQLITE_BLOB: {
                    const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(s, c));
                    const auto n = static_cast<std::size_t>(sqlite3_column_bytes(s, c));
                    v = Blob{std::vector<std::uint8_t>(p, p + n)};
                    break;
                }
                default: v = std::monostate{};
            }
            row.cells.emplace_back(columns[static_cast<std::size_t>(c)], std::move(v));
        }
        ++stats.rows;
        sink(std::move(row));
    }
    return stats;
}

std::vector<RawRow> read_all_rows(const DatabaseRef& db, const std::string& table) {
    std::vector<RawRow> rows;
    read_rows(db, table, [&](RawRow&& r) { rows.push_back(std::move(r)); });
    return rows;
}

}  // namespace ingest
}  // namespace dfkg
