#pragma once

#include <sqlite3.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dfkg::sqlite {

/// Owning handle for a sqlite3 connection.
class Connection {
public:
    /// Opens an evidence file without writing to it or its sidecars.
    static Connection open_evidence(const std::filesystem::path& path);
    /// Opens (creating if needed) a database for writing; used by fixtures.
    static Connection open_writable(const std::filesystem::path& path);

    Connection(Connection&& other) noexcept : db_(other.db_) { other.db_ = nullptr; }
    Connection& operator=(Connection&& other) noexcept;
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;
    ~Connection();

    sqlite3* get() const { return db_; }
    void exec(const std::string& sql);
    std::string last_error() const;

private:
    explicit Connection(sqlite3* db) : db_(db) {}
    sqlite3* db_ = nullptr;
};

/// Owning handle for a prepared statement.
class Statement {
public:
    /// Returns the sqlite result code alongside; `ok()` false means prepare failed.
    Statement(const Connection& conn, const std::string& sql);
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;
    ~Statement();

    bool ok() const { return stmt_ != nullptr; }
    int prepare_code() const { return prepare_code_; }
    sqlite3_stmt* get() const { return stmt_; }

    int step() { return sqlite3_step(stmt_); }
    void bind_text(int idx, std::string_view v);
    void bind_int(int idx, std::int64_t v);
    void bind_real(int idx, double v);
    void bind_blob(int idx, const std::vector<std::uint8_t>& v);
    void bind_null(int idx);
    void reset();

private:
    sqlite3_stmt* stmt_ = nullptr;
    int prepare_code_ = SQLITE_OK;
};

/// Double-quoted SQL identifier.
std::string quote_identifier(std::string_view name);

}  // namespace dfkg::sqlite
