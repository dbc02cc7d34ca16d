#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace landcover::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(std::string_view name) const;
};

/// Parses delimiter-separated text with RFC 4180 quoting. The first
/// record becomes the header. Blank lines are skipped.
Table parse(std::string_view text, char delimiter = ',');

/// Reads and parses a file; throws LoadError when it cannot be opened.
Table read_file(const std::filesystem::path& path, char delimiter = ',');

/// Picks tab when the first line contains one, otherwise comma.
char sniff_delimiter(std::string_view text);

std::string read_text(const std::filesystem::path& path);

/// Quotes a field when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict decimal parse; throws SchemaError on trailing garbage.
double parse_double(std::string_view text);

}  // namespace landcover::csv
