#include "qarwarn/text_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "qarwarn/error.hpp"

namespace qarwarn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Conversion: return "conversion error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::DegenerateData: return "degenerate data";
    case ErrorKind::UndefinedCorrelation: return "undefined correlation";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

std::string_view trim(std::string_view text) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    const auto end = pos == std::string_view::npos ? line.size() : pos;
    fields.emplace_back(trim(line.substr(start, end - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::optional<double> parse_finite(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) fail(ErrorKind::Numeric, "cannot format value");
  return std::string(buf, ptr);
}

std::vector<KeyValueLine> read_key_values(std::istream& in) {
  std::vector<KeyValueLine> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#' || body.front() == ';') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::Parse, "line " + std::to_string(number) + ": expected 'key = value'");
    }
    KeyValueLine kv;
    kv.line_number = number;
    kv.key = std::string(trim(body.substr(0, eq)));
    kv.value = std::string(trim(body.substr(eq + 1)));
    if (kv.key.empty()) {
      fail(ErrorKind::Parse, "line " + std::to_string(number) + ": empty key");
    }
    out.push_back(std::move(kv));
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open for writing: " + tmp.string());
    writer(out);
    out.flush();
    if (!out) fail(ErrorKind::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  write_file_atomic(path, [&](std::ostream& out) { out.write(contents.data(), contents.size()); });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> read_index_list(std::istream& in) {
  std::vector<std::size_t> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
    if (ec != std::errc{} || ptr != body.data() + body.size()) {
      fail(ErrorKind::Parse, "line " + std::to_string(number) + ": not an index");
    }
    out.push_back(value);
  }
  return out;
}

void write_index_list(std::ostream& out, const std::vector<std::size_t>& indices) {
  for (const auto i : indices) out << i << '\n';
}

}  // namespace qarwarn
