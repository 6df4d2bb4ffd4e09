#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dfkg {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Reads a whole file as bytes; throws Error(Io) on failure.
std::string read_file(const std::string& path);

/// Writes bytes to `path` through a temporary sibling and rename, so readers
/// never observe a half-written file.
void write_file_atomic(const std::string& path, std::string_view bytes);

/// Appends `line` plus LF to `path`, creating the file if needed, and flushes.
void append_line(const std::string& path, std::string_view line);

/// "YYYY-MM-DDTHH:MM:SSZ" for a Unix time.
std::string format_iso8601_utc(std::int64_t seconds);
std::string utc_now_iso8601();

}  // namespace dfkg
