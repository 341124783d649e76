#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace falconc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Case-insensitive header lookup.
  std::optional<std::size_t> column(std::string_view name) const;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
// Throws DataError when the file cannot be opened or a row has the wrong
// number of fields.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Strict full-string parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::string to_lower(std::string_view text);

}  // namespace falconc::csv
