#include "qarwarn/loss_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "qarwarn/error.hpp"
#include "qarwarn/text_io.hpp"

namespace qarwarn {

namespace {

double clip(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

void check_lengths(std::size_t a, std::size_t b) {
  require(a == b, ErrorKind::Argument,
          "label count " + std::to_string(a) + " differs from probability count " + std::to_string(b));
}

}  // namespace

CostMatrix derive_costs(std::span<const std::uint8_t> labels) {
  require(!labels.empty(), ErrorKind::DegenerateData, "no labels to derive costs from");
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  const auto zeros = labels.size() - ones;
  require(ones > 0 && zeros > 0, ErrorKind::DegenerateData,
          "cost derivation needs both classes in the training labels");
  const auto n = static_cast<double>(labels.size());
  return CostMatrix{static_cast<double>(zeros) / n, static_cast<double>(ones) / n};
}

double cs_bce_single(std::uint8_t y, double p, const CostMatrix& costs) {
  const double q = clip(p);
  return y ? -std::log(q) * costs.cost_01 : -std::log(1.0 - q) * costs.cost_10;
}

double cs_bce(std::span<const std::uint8_t> y, std::span<const double> p, const CostMatrix& costs) {
  check_lengths(y.size(), p.size());
  require(!y.empty(), ErrorKind::Argument, "loss of an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += cs_bce_single(y[i], p[i], costs);
  return sum / static_cast<double>(y.size());
}

double bce(std::span<const std::uint8_t> y, std::span<const double> p) {
  return cs_bce(y, p, CostMatrix{1.0, 1.0});
}

std::vector<double> cs_bce_grad(std::span<const std::uint8_t> y, std::span<const double> p,
                                const CostMatrix& costs) {
  check_lengths(y.size(), p.size());
  const auto n = static_cast<double>(y.size());
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = clip(p[i]);
    g[i] = y[i] ? -costs.cost_01 / q / n : costs.cost_10 / (1.0 - q) / n;
  }
  return g;
}

double cs_bce_logit_grad_single(std::uint8_t y, double p, const CostMatrix& costs) {
  return y ? -costs.cost_01 * (1.0 - p) : costs.cost_10 * p;
}

std::vector<double> cs_bce_grad_logit(std::span<const std::uint8_t> y, std::span<const double> p,
                                      const CostMatrix& costs) {
  check_lengths(y.size(), p.size());
  const auto n = static_cast<double>(y.size());
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = cs_bce_logit_grad_single(y[i], p[i], costs) / n;
  return g;
}

std::vector<std::uint8_t> classify(std::span<const double> p, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::Argument,
          "decision threshold must lie in (0, 1)");
  std::vector<std::uint8_t> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= threshold ? 1 : 0;
  return out;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> y, std::span<const std::uint8_t> predicted) {
  require(y.size() == predicted.size(), ErrorKind::Argument, "label and prediction counts differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0) {
      (predicted[i] == 0 ? cm.tp : cm.fn) += 1;
    } else {
      (predicted[i] == 0 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
  if (!precision || !recall || *precision + *recall == 0.0) return std::nullopt;
  return 2.0 * *precision * *recall / (*precision + *recall);
}

Metrics metrics(const ConfusionMatrix& cm) {
  require(cm.total() > 0, ErrorKind::Argument, "confusion matrix is empty");
  const auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  m.f1 = f1_score(m.precision, m.recall);
  m.overlimit_recall = ratio(cm.tn, cm.tn + cm.fp);
  return m;
}

namespace {

std::string show(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(6) << *v;
  return ss.str();
}

std::string kv(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

}  // namespace

void print_metrics(std::ostream& out, const ConfusionMatrix& cm, const Metrics& m) {
  out << "positive class = 0 (normal), negative class = 1 (over-limit)\n"
      << "                 pred 0     pred 1\n"
      << "  actual 0  " << std::setw(10) << cm.tp << " " << std::setw(10) << cm.fn << '\n'
      << "  actual 1  " << std::setw(10) << cm.fp << " " << std::setw(10) << cm.tn << '\n'
      << "accuracy          " << show(m.accuracy) << '\n'
      << "precision         " << show(m.precision) << '\n'
      << "recall            " << show(m.recall) << '\n'
      << "f1                " << show(m.f1) << '\n'
      << "over-limit recall " << show(m.overlimit_recall) << '\n';
}

void write_metrics_kv(std::ostream& out, const ConfusionMatrix& cm, const Metrics& m) {
  out << "convention=class0_positive\n"
      << "tp=" << cm.tp << "\nfp=" << cm.fp << "\ntn=" << cm.tn << "\nfn=" << cm.fn << '\n'
      << "accuracy=" << format_double(m.accuracy) << '\n'
      << "precision=" << kv(m.precision) << '\n'
      << "recall=" << kv(m.recall) << '\n'
      << "f1=" << kv(m.f1) << '\n'
      << "overlimit_recall=" << kv(m.overlimit_recall) << '\n';
}

ConfusionMatrix read_confusion_kv(std::istream& in) {
  ConfusionMatrix cm;
  int seen = 0;
  for (const auto& line : read_key_values(in)) {
    std::uint64_t* slot = nullptr;
    if (line.key == "tp") slot = &cm.tp;
    if (line.key == "fp") slot = &cm.fp;
    if (line.key == "tn") slot = &cm.tn;
    if (line.key == "fn") slot = &cm.fn;
    if (!slot) continue;
    const auto v = parse_finite(line.value);
    if (!v || *v < 0) fail(ErrorKind::Parse, "line " + std::to_string(line.line_number) + ": bad count");
    *slot = static_cast<std::uint64_t>(*v);
    ++seen;
  }
  require(seen == 4, ErrorKind::Parse, "confusion file lacks one of tp/fp/tn/fn");
  return cm;
}

}  // namespace qarwarn
