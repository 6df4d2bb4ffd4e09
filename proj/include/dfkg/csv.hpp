#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dfkg::csv {

using Row = std::vector<std::string>;

/// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string escape_field(std::string_view field);

/// One record terminated by LF.
std::string format_row(const Row& fields);

/// Parses RFC 4180 text (LF or CRLF record separators, quoted fields may span
/// lines). Throws Error(InvalidInput) on an unterminated quoted field.
std::vector<Row> parse(std::string_view text);

}  // namespace dfkg::csv
