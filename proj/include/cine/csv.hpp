#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cine {

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);

/// RFC 4180 style reader: quoted fields, doubled quotes, CRLF or LF rows.
/// Blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace cine
