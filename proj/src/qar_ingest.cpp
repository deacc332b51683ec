#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "qarwarn/error.hpp"
#include "qarwarn/qar_table.hpp"
#include "qarwarn/text_io.hpp"

namespace qarwarn {

const char* to_string(ColumnKind kind) noexcept {
  return kind == ColumnKind::Binary ? "binary" : "continuous";
}

ColumnKind parse_column_kind(const std::string& text) {
  if (text == "continuous") return ColumnKind::Continuous;
  if (text == "binary") return ColumnKind::Binary;
  fail(ErrorKind::Parse, "unknown column kind '" + text + "'");
}

bool Column::is_numeric() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const Cell& c) { return std::holds_alternative<double>(c); });
}

std::vector<double> Column::numeric_values() const {
  std::vector<double> out;
  out.reserve(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (const auto* v = std::get_if<double>(&cells[r])) {
      out.push_back(*v);
    } else {
      fail(ErrorKind::State, "column '" + name + "' row " + std::to_string(r) +
                                 " holds text '" + std::get<std::string>(cells[r]) +
                                 "'; convert text labels first");
    }
  }
  return out;
}

QarTable::QarTable(std::vector<Column> columns, std::vector<std::int64_t> timestamps,
                   std::vector<std::int32_t> flights)
    : columns_(std::move(columns)),
      timestamps_(std::move(timestamps)),
      flights_(std::move(flights)) {
  require(flights_.size() == timestamps_.size(), ErrorKind::Argument,
          "flight tags and timestamps differ in length");
  for (const auto& c : columns_) {
    require(c.cells.size() == timestamps_.size(), ErrorKind::Argument,
            "column '" + c.name + "' length differs from row count");
  }
  for (std::size_t r = 1; r < timestamps_.size(); ++r) {
    if (flights_[r] == flights_[r - 1] && timestamps_[r] < timestamps_[r - 1]) {
      fail(ErrorKind::Argument, "timestamps decrease at row " + std::to_string(r));
    }
  }
}

std::optional<std::size_t> QarTable::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

const Column& QarTable::column(const std::string& name) const {
  const auto idx = find_column(name);
  if (!idx) fail(ErrorKind::Schema, "no column named '" + name + "'");
  return columns_[*idx];
}

bool QarTable::is_numeric() const {
  return std::all_of(columns_.begin(), columns_.end(),
                     [](const Column& c) { return c.is_numeric(); });
}

void Schema::add(const std::string& name, ColumnKind kind) {
  require(!kind_of(name).has_value(), ErrorKind::Schema,
          "column '" + name + "' declared twice");
  require(name != kTimeColumn && name != kFlightColumn, ErrorKind::Schema,
          "'" + name + "' is a reserved column name");
  columns.emplace_back(name, kind);
}

std::optional<ColumnKind> Schema::kind_of(const std::string& name) const {
  for (const auto& [n, k] : columns) {
    if (n == name) return k;
  }
  return std::nullopt;
}

TextCodebook TextCodebook::defaults() {
  TextCodebook book;
  book.set("GEAR SELECT DOWN", "NaN", 0);
  book.set("GEAR SELECT DOWN", "DOWN", 1);
  book.set("WOW INDICATE INAIR", "FALSE", 0);
  book.set("WOW INDICATE INAIR", "TRUE", 1);
  book.set("A/T ENGAGED", "DISENGD", 0);
  book.set("A/T ENGAGED", "ENGAGED", 1);
  book.set("ANY A/P ENGAGED", "ON", 0);
  book.set("ANY A/P ENGAGED", "OFF", 1);
  return book;
}

void TextCodebook::set(const std::string& attribute, const std::string& label, double code) {
  for (const auto& [key, existing] : entries_) {
    if (key.first == attribute && key.second != label && existing == code) {
      fail(ErrorKind::Argument, "attribute '" + attribute + "': labels '" + key.second +
                                    "' and '" + label + "' would share code " +
                                    format_double(code));
    }
  }
  entries_[{attribute, label}] = code;
}

std::optional<double> TextCodebook::lookup(const std::string& attribute,
                                           const std::string& label) const {
  const auto it = entries_.find({attribute, label});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

Schema read_schema(std::istream& in) {
  Schema schema;
  for (const auto& kv : read_key_values(in)) {
    try {
      schema.add(kv.key, parse_column_kind(kv.value));
    } catch (const Error& e) {
      fail(e.kind(), "schema line " + std::to_string(kv.line_number) + ": " + e.what());
    }
  }
  return schema;
}

void write_schema(std::ostream& out, const Schema& schema) {
  for (const auto& [name, kind] : schema.columns) out << name << " = " << to_string(kind) << '\n';
}

TextCodebook read_codebook(std::istream& in, TextCodebook base) {
  for (const auto& kv : read_key_values(in)) {
    const auto where = "codebook line " + std::to_string(kv.line_number);
    const auto slash = kv.key.rfind('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == kv.key.size()) {
      fail(ErrorKind::Parse, where + ": expected 'attribute/label = code'");
    }
    const auto code = parse_finite(kv.value);
    if (!code) fail(ErrorKind::Parse, where + ": code is not a number");
    base.set(std::string(trim(kv.key.substr(0, slash))),
             std::string(trim(kv.key.substr(slash + 1))), *code);
  }
  return base;
}

namespace {

std::int64_t parse_integer_field(const std::string& text, std::size_t line, const char* what) {
  const auto v = parse_finite(text);
  if (!v || std::floor(*v) != *v) {
    fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what +
                               " '" + text + "' is not an integer");
  }
  return static_cast<std::int64_t>(*v);
}

}  // namespace

QarTable parse_table(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "line 1: missing header row");
  const auto header = split_fields(line);

  std::optional<std::size_t> time_idx;
  std::optional<std::size_t> flight_idx;
  std::vector<std::size_t> source(schema.columns.size());
  std::vector<bool> found(schema.columns.size(), false);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == kTimeColumn) time_idx = i;
    if (header[i] == kFlightColumn) flight_idx = i;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      if (schema.columns[c].first == header[i]) {
        if (found[c]) fail(ErrorKind::Schema, "column '" + header[i] + "' appears twice in header");
        source[c] = i;
        found[c] = true;
      }
    }
  }
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (!found[c]) fail(ErrorKind::Schema, "declared column '" + schema.columns[c].first + "' missing from header");
  }

  std::vector<Column> columns;
  for (const auto& [name, kind] : schema.columns) columns.push_back(Column{name, kind, {}});
  std::vector<std::int64_t> timestamps;
  std::vector<std::int32_t> flights;

  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_number) + ": expected " +
                                 std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()));
    }
    const auto row = timestamps.size();
    timestamps.push_back(time_idx ? parse_integer_field(fields[*time_idx], line_number, "timestamp")
                                  : static_cast<std::int64_t>(row));
    flights.push_back(flight_idx ? static_cast<std::int32_t>(parse_integer_field(
                                       fields[*flight_idx], line_number, "flight id"))
                                 : 0);
    if (row > 0 && flights[row] == flights[row - 1] && timestamps[row] < timestamps[row - 1]) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_number) + ": timestamp decreases");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& raw = fields[source[c]];
      if (const auto v = parse_finite(raw)) {
        columns[c].cells.emplace_back(*v);
      } else {
        columns[c].cells.emplace_back(raw);
      }
    }
  }
  return QarTable(std::move(columns), std::move(timestamps), std::move(flights));
}

QarTable convert_text_labels(const QarTable& table, const TextCodebook& codebook) {
  std::vector<Column> columns = table.columns();
  for (auto& col : columns) {
    if (col.kind != ColumnKind::Binary) continue;
    for (auto& cell : col.cells) {
      if (const auto* text = std::get_if<std::string>(&cell)) {
        const auto code = codebook.lookup(col.name, *text);
        if (!code) {
          fail(ErrorKind::Conversion, "attribute '" + col.name + "' has unmapped label '" + *text + "'");
        }
        cell = *code;
      }
      const double v = std::get<double>(cell);
      if (v != 0.0 && v != 1.0) {
        fail(ErrorKind::Conversion, "binary attribute '" + col.name + "' holds value " + format_double(v));
      }
    }
  }
  return QarTable(std::move(columns), table.timestamps(), table.flights());
}

QarTable resample_1hz(const QarTable& table) {
  std::vector<std::vector<double>> values;
  values.reserve(table.column_count());
  for (const auto& col : table.columns()) values.push_back(col.numeric_values());

  std::vector<Column> columns;
  for (const auto& col : table.columns()) columns.push_back(Column{col.name, col.kind, {}});
  std::vector<std::int64_t> timestamps;
  std::vector<std::int32_t> flights;

  const auto& ts = table.timestamps();
  const auto& fl = table.flights();
  std::size_t begin = 0;
  while (begin < table.row_count()) {
    std::size_t end = begin + 1;
    while (end < table.row_count() && ts[end] == ts[begin] && fl[end] == fl[begin]) ++end;
    timestamps.push_back(ts[begin]);
    flights.push_back(fl[begin]);
    const auto count = static_cast<double>(end - begin);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& v = values[c];
      if (columns[c].kind == ColumnKind::Continuous) {
        double sum = 0.0;
        double lo = v[begin];
        double hi = v[begin];
        for (std::size_t r = begin; r < end; ++r) {
          sum += v[r];
          lo = std::min(lo, v[r]);
          hi = std::max(hi, v[r]);
        }
        // Rounding in the sum must not push the mean outside the sample range.
        columns[c].cells.emplace_back(std::clamp(sum / count, lo, hi));
      } else {
        std::size_t ones = 0;
        for (std::size_t r = begin; r < end; ++r) ones += v[r] == 1.0 ? 1 : 0;
        const auto zeros = (end - begin) - ones;
        columns[c].cells.emplace_back(ones >= zeros ? 1.0 : 0.0);
      }
    }
    begin = end;
  }
  return QarTable(std::move(columns), std::move(timestamps), std::move(flights));
}

// ---- synthetic flights ---------------------------------------------------

namespace {

void check_synthetic(const SyntheticSpec& spec) {
  require(spec.overlimit_rate > 0.0 && spec.overlimit_rate < 0.5, ErrorKind::Argument,
          "overlimit rate must lie in (0, 0.5)");
  require(spec.attributes >= 2, ErrorKind::Argument, "at least 2 attributes required");
  require(spec.seconds >= 1, ErrorKind::Argument, "seconds must be positive");
}

std::vector<bool> draw_spikes(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<bool> spikes(spec.seconds);
  for (std::size_t s = 0; s < spec.seconds; ++s) spikes[s] = unit(rng) < spec.overlimit_rate;
  return spikes;
}

constexpr std::size_t kLeadHorizon = 5;

// 1 at a spike, decaying linearly over the preceding seconds.
std::vector<double> lead_signal(const std::vector<bool>& spikes) {
  std::vector<double> lead(spikes.size(), 0.0);
  for (std::size_t s = 0; s < spikes.size(); ++s) {
    for (std::size_t d = 0; d < kLeadHorizon && s + d < spikes.size(); ++d) {
      if (spikes[s + d]) {
        lead[s] = std::max(lead[s], 1.0 - static_cast<double>(d) / kLeadHorizon);
      }
    }
  }
  return lead;
}

std::string companion_name(std::size_t index) {
  if (index == 1) return "A/T ENGAGED";
  const auto ordinal = std::to_string(index / 2);
  return index % 2 == 0 ? "LEAD " + ordinal : "NOISE " + ordinal;
}

}  // namespace

Schema synthetic_schema(std::size_t attributes) {
  require(attributes >= 2, ErrorKind::Argument, "at least 2 attributes required");
  Schema schema;
  schema.add("G", ColumnKind::Continuous);
  for (std::size_t a = 1; a < attributes; ++a) {
    schema.add(companion_name(a), a == 1 ? ColumnKind::Binary : ColumnKind::Continuous);
  }
  return schema;
}

std::vector<std::size_t> synthetic_spike_seconds(const SyntheticSpec& spec) {
  check_synthetic(spec);
  const auto spikes = draw_spikes(spec);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < spikes.size(); ++s) {
    if (spikes[s]) out.push_back(s);
  }
  return out;
}

QarTable generate_synthetic(const SyntheticSpec& spec) {
  check_synthetic(spec);
  const auto spikes = draw_spikes(spec);
  const auto lead = lead_signal(spikes);
  const auto schema = synthetic_schema(spec.attributes);

  std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Column> columns;
  for (const auto& [name, kind] : schema.columns) columns.push_back(Column{name, kind, {}});

  double drift = 0.0;
  for (std::size_t s = 0; s < spec.seconds; ++s) {
    drift = 0.9 * drift + 0.01 * normal(rng);
    double g = 1.0 + drift;
    if (spikes[s]) g += 0.6 + 0.4 * unit(rng);
    columns[0].cells.emplace_back(std::max(0.0, g));

    const bool disengaged = (lead[s] >= 0.6) != (unit(rng) < 0.03);
    columns[1].cells.emplace_back(std::string(disengaged ? "DISENGD" : "ENGAGED"));

    for (std::size_t a = 2; a < spec.attributes; ++a) {
      const auto ordinal = static_cast<double>(a / 2);
      double v = 0.0;
      if (a % 2 == 0) {
        const double sign = (a / 2) % 2 == 1 ? 1.0 : -1.0;
        const double amplitude = 2.0 / ordinal;
        v = 10.0 * ordinal + sign * amplitude * lead[s] + 0.3 * normal(rng);
      } else {
        v = 50.0 + 5.0 * normal(rng);
      }
      columns[a].cells.emplace_back(v);
    }
  }

  std::vector<std::int64_t> timestamps(spec.seconds);
  for (std::size_t s = 0; s < spec.seconds; ++s) timestamps[s] = static_cast<std::int64_t>(s);
  return QarTable(std::move(columns), std::move(timestamps),
                  std::vector<std::int32_t>(spec.seconds, 0));
}

void write_table(std::ostream& out, const QarTable& table) {
  out << kTimeColumn << ',' << kFlightColumn;
  for (const auto& col : table.columns()) out << ',' << col.name;
  out << '\n';
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    out << table.timestamps()[r] << ',' << table.flights()[r];
    for (const auto& col : table.columns()) {
      out << ',';
      if (const auto* v = std::get_if<double>(&col.cells[r])) {
        out << format_double(*v);
      } else {
        out << std::get<std::string>(col.cells[r]);
      }
    }
    out << '\n';
  }
}

QarTable concat_flights(const std::vector<QarTable>& tables) {
  require(!tables.empty(), ErrorKind::Argument, "no tables to concatenate");
  std::vector<Column> columns;
  for (const auto& col : tables.front().columns()) columns.push_back(Column{col.name, col.kind, {}});
  std::vector<std::int64_t> timestamps;
  std::vector<std::int32_t> flights;
  std::int32_t next_flight = 0;
  for (const auto& t : tables) {
    require(t.column_count() == columns.size(), ErrorKind::Schema, "tables have different columns");
    std::int32_t max_seen = -1;
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      timestamps.push_back(t.timestamps()[r]);
      flights.push_back(next_flight + t.flights()[r]);
      max_seen = std::max(max_seen, t.flights()[r]);
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      require(t.columns()[c].name == columns[c].name, ErrorKind::Schema, "tables have different columns");
      columns[c].cells.insert(columns[c].cells.end(), t.columns()[c].cells.begin(),
                              t.columns()[c].cells.end());
    }
    next_flight += max_seen + 1;
  }
  return QarTable(std::move(columns), std::move(timestamps), std::move(flights));
}

QarTable with_column(const QarTable& table, Column column) {
  require(column.cells.size() == table.row_count(), ErrorKind::Argument,
          "new column length differs from row count");
  require(!table.find_column(column.name), ErrorKind::Schema,
          "column '" + column.name + "' already exists");
  auto columns = table.columns();
  columns.push_back(std::move(column));
  return QarTable(std::move(columns), table.timestamps(), table.flights());
}

}  // namespace qarwarn
