#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qarwarn {

enum class ColumnKind { Continuous, Binary };

const char* to_string(ColumnKind kind) noexcept;
ColumnKind parse_column_kind(const std::string& text);

// A raw cell keeps its text until convert_text_labels has run.
using Cell = std::variant<double, std::string>;

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<Cell> cells;

  bool is_numeric() const;
  // Throws ErrorKind::State if any cell is still text.
  std::vector<double> numeric_values() const;
};

inline constexpr const char* kTimeColumn = "TIME";
inline constexpr const char* kFlightColumn = "FLIGHT";
inline constexpr const char* kLabelColumn = "LABEL";

/// Timestamped table of flight attributes.
///
/// Timestamps are integer seconds and may repeat when several samples were
/// recorded within one second. `flights` tags each row with the flight it
/// came from so concatenated recordings stay separable; timestamps are
/// non-decreasing within a flight.
class QarTable {
 public:
  QarTable() = default;
  QarTable(std::vector<Column> columns, std::vector<std::int64_t> timestamps,
           std::vector<std::int32_t> flights);

  std::size_t row_count() const { return timestamps_.size(); }
  std::size_t column_count() const { return columns_.size(); }

  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::int64_t>& timestamps() const { return timestamps_; }
  const std::vector<std::int32_t>& flights() const { return flights_; }

  const Column& column(const std::string& name) const;
  std::optional<std::size_t> find_column(const std::string& name) const;
  bool is_numeric() const;

 private:
  std::vector<Column> columns_;
  std::vector<std::int64_t> timestamps_;
  std::vector<std::int32_t> flights_;
};

/// Declared column kinds, in declaration order.
struct Schema {
  std::vector<std::pair<std::string, ColumnKind>> columns;

  void add(const std::string& name, ColumnKind kind);
  std::optional<ColumnKind> kind_of(const std::string& name) const;
};

/// Maps (attribute, text label) to a numeric code.
class TextCodebook {
 public:
  // Built-in table: GEAR SELECT DOWN, WOW INDICATE INAIR, A/T ENGAGED and
  // ANY A/P ENGAGED label conversions.
  static TextCodebook defaults();

  // Replaces an existing (attribute, label) entry; a code already taken by a
  // different label of the same attribute is rejected.
  void set(const std::string& attribute, const std::string& label, double code);
  std::optional<double> lookup(const std::string& attribute,
                               const std::string& label) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, double> entries_;
};

// ---- text formats --------------------------------------------------------

Schema read_schema(std::istream& in);
void write_schema(std::ostream& out, const Schema& schema);
// Entries are `attribute/label = code`, layered on top of `base`.
TextCodebook read_codebook(std::istream& in, TextCodebook base = TextCodebook::defaults());

// ---- operations ----------------------------------------------------------

/// Reads a comma-separated table. Declared columns are kept in schema order;
/// undeclared columns other than TIME/FLIGHT are dropped.
QarTable parse_table(std::istream& in, const Schema& schema);

QarTable convert_text_labels(const QarTable& table, const TextCodebook& codebook);

/// Collapses rows sharing a (flight, second) pair: mean for continuous
/// columns, mode for binary columns with ties resolved to 1.
QarTable resample_1hz(const QarTable& table);

struct SyntheticSpec {
  std::uint64_t seed = 42;
  std::size_t seconds = 2000;
  std::size_t attributes = 6;
  double overlimit_rate = 0.02;
};

/// Deterministic stand-in flight at 1 Hz. Column 0 is "G"; column 1 is the
/// binary "A/T ENGAGED", written as raw DISENGD/ENGAGED text the way a
/// recorder export would carry it; further columns alternate between lead
/// indicators that ramp up ahead of each injected G spike and independent
/// noise.
QarTable generate_synthetic(const SyntheticSpec& spec);
Schema synthetic_schema(std::size_t attributes);

// Seconds in which a G spike was injected for the given spec.
std::vector<std::size_t> synthetic_spike_seconds(const SyntheticSpec& spec);

/// Writes TIME, FLIGHT and every column; numbers use the shortest
/// round-trip representation so output is byte-stable.
void write_table(std::ostream& out, const QarTable& table);

QarTable concat_flights(const std::vector<QarTable>& tables);
QarTable with_column(const QarTable& table, Column column);

}  // namespace qarwarn
