#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vaxcov::csv {

/// A parsed CSV file. Lines starting with '#' before the header are kept in
/// `comments`; blank lines are skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, parallel to rows
  std::vector<std::string> comments;

  std::optional<std::size_t> column(std::string_view name) const;
};

Table parse(std::istream& in, const std::string& source_name);
Table read_file(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

/// Shortest representation that round-trips exactly.
std::string format_double(double value);

/// Whole-field numeric parses; nullopt on any trailing text.
std::optional<double> to_double(std::string_view text);
std::optional<int> to_int(std::string_view text);
std::optional<std::uint64_t> to_uint64(std::string_view text);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);

}  // namespace vaxcov::csv
