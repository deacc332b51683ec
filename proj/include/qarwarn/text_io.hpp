#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qarwarn {

std::string_view trim(std::string_view text);
std::vector<std::string> split_fields(std::string_view line, char delimiter = ',');

// Accepts only finite values spanning the whole (trimmed) field.
std::optional<double> parse_finite(std::string_view text);

// Shortest representation that reads back to the same double.
std::string format_double(double value);

struct KeyValueLine {
  std::size_t line_number = 0;
  std::string key;
  std::string value;
};

/// `key = value` lines; blank lines and lines starting with '#' or ';' are
/// skipped. A line without '=' is a parse error naming its line number.
std::vector<KeyValueLine> read_key_values(std::istream& in);

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

std::vector<std::size_t> read_index_list(std::istream& in);
void write_index_list(std::ostream& out, const std::vector<std::size_t>& indices);

}  // namespace qarwarn
