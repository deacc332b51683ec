#include "qarwarn/warn.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <thread>

#include "qarwarn/error.hpp"
#include "qarwarn/qar_table.hpp"
#include "qarwarn/text_io.hpp"

namespace qarwarn {

const char* to_string(WarnStatus status) noexcept {
  switch (status) {
    case WarnStatus::Warmup: return "WARMUP";
    case WarnStatus::Ok: return "OK";
    case WarnStatus::Alert: return "ALERT";
  }
  return "?";
}

std::string format_warn_line(const WarnLine& line) {
  std::string prob = "-";
  if (line.probability) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, *line.probability, std::chars_format::fixed, 6);
    prob.assign(buf, res.ptr);
  }
  return std::to_string(line.timestamp) + '\t' + prob + '\t' + to_string(line.status);
}

StreamingWarner::StreamingWarner(Model model) : model_(std::move(model)) {
  require(model_.time_step >= 1, ErrorKind::Argument, "model time step must be at least 1");
  require(model_.features.size() == model_.params.features() &&
              model_.normalization.features() == model_.features.size(),
          ErrorKind::Argument, "model feature list, stats and network disagree");
  require(model_.threshold > 0.0 && model_.threshold < 1.0, ErrorKind::Argument,
          "threshold must lie in (0, 1)");
  window_.resize(model_.time_step * model_.features.size());
}

void StreamingWarner::reset() {
  buffer_.clear();
  flight_.reset();
  rows_in_flight_ = 0;
}

std::vector<WarnLine> StreamingWarner::push(std::int64_t timestamp, std::int32_t flight,
                                            std::span<const double> raw) {
  const auto k = model_.features.size();
  const auto T = model_.time_step;
  require(raw.size() == k, ErrorKind::Argument,
          "row has " + std::to_string(raw.size()) + " features, model expects " + std::to_string(k));
  if (flight_ && *flight_ != flight) {
    buffer_.clear();
    rows_in_flight_ = 0;
  }
  flight_ = flight;

  std::vector<double> row(k);
  apply_minmax_row(raw, row, model_.normalization);
  if (buffer_.size() == T) buffer_.pop_front();
  buffer_.push_back(std::move(row));
  ++rows_in_flight_;

  std::vector<WarnLine> out;
  if (rows_in_flight_ <= T) out.push_back(WarnLine{timestamp, std::nullopt, WarnStatus::Warmup});
  if (buffer_.size() == T) {
    for (std::size_t t = 0; t < T; ++t) {
      std::copy(buffer_[t].begin(), buffer_[t].end(), window_.begin() + static_cast<std::ptrdiff_t>(t * k));
    }
    const double p = forward(model_.params, window_, T, tape_);
    out.push_back(WarnLine{timestamp + 1, p, p >= model_.threshold ? WarnStatus::Alert : WarnStatus::Ok});
  }
  return out;
}

std::size_t run_warn(std::istream& in, std::ostream& out, const Model& model,
                     const WarnOptions& options) {
  Model m = model;
  if (options.threshold) m.threshold = *options.threshold;
  StreamingWarner warner(std::move(m));

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, "stream has no header line");
  const auto header = split_fields(line, ',');
  std::optional<std::size_t> time_col;
  std::optional<std::size_t> flight_col;
  std::vector<std::optional<std::size_t>> feature_col(model.features.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim(header[c]));
    if (name == kTimeColumn) time_col = c;
    if (name == kFlightColumn) flight_col = c;
    for (std::size_t f = 0; f < model.features.size(); ++f) {
      if (name == model.features[f]) feature_col[f] = c;
    }
  }
  for (std::size_t f = 0; f < model.features.size(); ++f) {
    require(feature_col[f].has_value(), ErrorKind::Schema,
            "stream lacks model feature '" + model.features[f] + "'");
  }

  std::vector<double> raw(model.features.size());
  std::size_t line_no = 1;
  std::size_t written = 0;
  std::int64_t row_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    const auto where = "line " + std::to_string(line_no) + ": ";
    require(fields.size() == header.size(), ErrorKind::Parse,
            where + "expected " + std::to_string(header.size()) + " fields, found " +
                std::to_string(fields.size()));
    for (std::size_t f = 0; f < raw.size(); ++f) {
      const auto v = parse_finite(fields[*feature_col[f]]);
      require(v.has_value(), ErrorKind::Parse,
              where + "feature '" + model.features[f] + "' is not a finite number");
      raw[f] = *v;
    }
    std::int64_t ts = row_index;
    std::int32_t flight = 0;
    if (time_col) {
      const auto v = parse_finite(fields[*time_col]);
      require(v && *v == std::floor(*v), ErrorKind::Parse, where + "bad TIME value");
      ts = static_cast<std::int64_t>(*v);
    }
    if (flight_col) {
      const auto v = parse_finite(fields[*flight_col]);
      require(v && *v == std::floor(*v), ErrorKind::Parse, where + "bad FLIGHT value");
      flight = static_cast<std::int32_t>(*v);
    }
    ++row_index;
    for (const auto& w : warner.push(ts, flight, raw)) {
      out << format_warn_line(w) << '\n';
      ++written;
    }
    out.flush();
    if (options.realtime) std::this_thread::sleep_for(std::chrono::seconds(1));
  }
  return written;
}

}  // namespace qarwarn
