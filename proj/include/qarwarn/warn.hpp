#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qarwarn/lstm.hpp"

namespace qarwarn {

enum class WarnStatus { Warmup, Ok, Alert };

const char* to_string(WarnStatus status) noexcept;

struct WarnLine {
  std::int64_t timestamp = 0;
  std::optional<double> probability;  // absent during warmup
  WarnStatus status = WarnStatus::Warmup;
};

// "<timestamp>\t<probability, 6 d.p. or ->\t<WARMUP|OK|ALERT>"
std::string format_warn_line(const WarnLine& line);

/// Sliding buffer of the last T normalized rows of one flight.
///
/// Every pushed row yields a WARMUP line for its own instant until the
/// buffer is full; from then on it yields the forecast for the next
/// instant. A change of flight tag empties the buffer.
class StreamingWarner {
 public:
  explicit StreamingWarner(Model model);

  const Model& model() const { return model_; }

  // `raw` holds the model's features in model order, unnormalized.
  std::vector<WarnLine> push(std::int64_t timestamp, std::int32_t flight,
                             std::span<const double> raw);

  void reset();
  bool warmed_up() const { return buffer_.size() == model_.time_step; }

 private:
  Model model_;
  std::deque<std::vector<double>> buffer_;
  std::optional<std::int32_t> flight_;
  std::size_t rows_in_flight_ = 0;
  std::vector<double> window_;
  Tape tape_;
};

struct WarnOptions {
  std::optional<double> threshold;  // overrides the model's threshold
  bool realtime = false;            // sleep one second per input row
};

/// Reads a comma-separated table with a header (TIME and FLIGHT optional,
/// extra columns ignored) and writes one line per instant. Every model
/// feature must appear in the header; this is checked before any
/// inference. Returns the number of lines written.
std::size_t run_warn(std::istream& in, std::ostream& out, const Model& model,
                     const WarnOptions& options = {});

}  // namespace qarwarn
