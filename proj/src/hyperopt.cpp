#include "qarwarn/hyperopt.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "qarwarn/error.hpp"
#include "qarwarn/text_io.hpp"

namespace qarwarn {

void GridSpec::validate() const {
  require(!time_steps.empty() && !units.empty() && !learning_rates.empty(), ErrorKind::Argument,
          "grid lists must be non-empty");
  for (const auto t : time_steps) require(t >= 1, ErrorKind::Argument, "time steps must be positive");
  for (const auto n : units) require(n >= 1, ErrorKind::Argument, "unit counts must be positive");
  for (const auto a : learning_rates) {
    require(std::isfinite(a) && a > 0.0, ErrorKind::Argument, "learning rates must be positive");
  }
  require(epochs >= 1, ErrorKind::Argument, "epochs must be at least 1");
  require(folds >= 2, ErrorKind::Argument, "fold count must be at least 2");
  require(batch_size >= 1, ErrorKind::Argument, "batch size must be at least 1");
}

std::size_t GridSpec::cardinality() const {
  return time_steps.size() * units.size() * learning_rates.size();
}

std::uint64_t combination_seed(std::uint64_t seed, std::size_t time_step, std::size_t units,
                               double learning_rate) {
  auto s = derive_seed(seed, time_step);
  s = derive_seed(s, units);
  return derive_seed(s, std::bit_cast<std::uint64_t>(learning_rate));
}

namespace {

// Everything that depends on T alone.
struct TimeStepData {
  std::size_t time_step = 0;
  bool feasible = false;
  std::string note;
  WindowSet windows;
  FoldPlan plan;
};

TimeStepData prepare(const GridSource& source, const GridSpec& spec, std::size_t T) {
  TimeStepData d;
  d.time_step = T;
  if (source.rows.rows < T + 1) {
    d.note = "needs " + std::to_string(T + 1) + " rows, have " + std::to_string(source.rows.rows);
    return d;
  }
  d.windows = build_windows(source.rows, source.labels, T, source.flights);
  if (d.windows.count < 2) {
    d.note = "fewer than 2 windows";
    return d;
  }
  const auto split = split_80_20(d.windows.count, spec.seed);
  if (split.train.size() < spec.folds) {
    d.note = "training portion smaller than the fold count";
    return d;
  }
  const auto stats = spec.normalization == NormalizationMode::LeakFree
                         ? fit_minmax(source.rows, covered_rows(d.windows, split.train))
                         : fit_minmax(source.rows);
  normalize_windows(d.windows, stats);
  d.plan = make_folds(split.train, spec.folds, derive_seed(spec.seed, T));
  d.feasible = true;
  return d;
}

GridRow run_combination(const TimeStepData& d, const GridSpec& spec, std::size_t n, double alpha,
                        bool parallel_inner) {
  GridRow row;
  row.time_step = d.time_step;
  row.units = n;
  row.learning_rate = alpha;
  if (!d.feasible) {
    row.feasible = false;
    row.note = d.note;
    return row;
  }
  TrainConfig config;
  config.units = n;
  config.learning_rate = alpha;
  config.epochs = spec.epochs;
  config.batch_size = spec.batch_size;
  config.seed = combination_seed(spec.seed, d.time_step, n, alpha);
  config.cost_mode = spec.cost_mode;
  config.threshold = spec.threshold;
  config.parallel = parallel_inner;

  double seconds = 0.0;
  for (std::size_t f = 0; f < d.plan.k; ++f) {
    SplitIndices fold_split;
    fold_split.train = d.plan.training_indices(f);
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto fit = train(d.windows, fold_split, config);
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const auto cm = evaluate(fit.params, d.windows, d.plan.folds[f], spec.threshold);
      row.fold_accuracies.push_back(static_cast<double>(cm.tp + cm.tn) /
                                    static_cast<double>(cm.total()));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateData && e.kind() != ErrorKind::Numeric) throw;
      row.feasible = false;
      row.note = "fold " + std::to_string(f + 1) + ": " + e.what();
      row.fold_accuracies.clear();
      return row;
    }
  }
  double sum = 0.0;
  for (const auto a : row.fold_accuracies) sum += a;
  row.mean_accuracy = sum / static_cast<double>(row.fold_accuracies.size());
  row.mean_fit_seconds = seconds / static_cast<double>(d.plan.k);
  return row;
}

}  // namespace

GridResult grid_search(const GridSource& source, const GridSpec& spec) {
  spec.validate();
  require(source.rows.rows == source.labels.size(), ErrorKind::Argument,
          "label count differs from row count");
  require(source.flights.empty() || source.flights.size() == source.rows.rows, ErrorKind::Argument,
          "flight tags differ from row count");

  std::vector<TimeStepData> per_t;
  per_t.reserve(spec.time_steps.size());
  for (const auto T : spec.time_steps) per_t.push_back(prepare(source, spec, T));

  struct Combo {
    std::size_t t_index;
    std::size_t units;
    double alpha;
  };
  std::vector<Combo> combos;
  for (std::size_t ti = 0; ti < per_t.size(); ++ti) {
    for (const auto n : spec.units) {
      for (const auto a : spec.learning_rates) combos.push_back({ti, n, a});
    }
  }

  std::vector<GridRow> rows(combos.size());
  if (spec.parallel) {
    const auto count = static_cast<std::ptrdiff_t>(combos.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        const auto& c = combos[static_cast<std::size_t>(i)];
        rows[static_cast<std::size_t>(i)] = run_combination(per_t[c.t_index], spec, c.units, c.alpha, false);
      } catch (...) {
#pragma omp critical(qarwarn_grid_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (std::size_t i = 0; i < combos.size(); ++i) {
      const auto& c = combos[i];
      rows[i] = run_combination(per_t[c.t_index], spec, c.units, c.alpha, true);
    }
  }
  return GridResult{rank_results(std::move(rows))};
}

std::vector<GridRow> rank_results(std::vector<GridRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.feasible != b.feasible) return a.feasible;
    if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
    if (a.mean_fit_seconds != b.mean_fit_seconds) return a.mean_fit_seconds < b.mean_fit_seconds;
    if (a.time_step != b.time_step) return a.time_step < b.time_step;
    if (a.units != b.units) return a.units < b.units;
    return a.learning_rate < b.learning_rate;
  });
  return rows;
}

void print_grid(std::ostream& out, const GridResult& result) {
  out << std::setw(4) << "rank" << std::setw(6) << "T" << std::setw(6) << "n" << std::setw(10)
      << "alpha" << std::setw(12) << "mean_acc" << std::setw(12) << "fit_s" << "  status\n";
  std::size_t rank = 0;
  for (const auto& r : result.rows) {
    out << std::setw(4) << ++rank << std::setw(6) << r.time_step << std::setw(6) << r.units
        << std::setw(10) << format_double(r.learning_rate);
    if (r.feasible) {
      out << std::fixed << std::setprecision(6) << std::setw(12) << r.mean_accuracy
          << std::setprecision(3) << std::setw(12) << r.mean_fit_seconds << std::defaultfloat
          << "  ok\n";
    } else {
      out << std::setw(12) << "-" << std::setw(12) << "-" << "  infeasible: " << r.note << '\n';
    }
  }
}

namespace {
constexpr const char* kGridTsvHeader =
    "rank\ttime_step\tunits\tlearning_rate\tfeasible\tmean_accuracy\tmean_fit_seconds\t"
    "fold_accuracies\tnote";
}  // namespace

void write_grid_tsv(std::ostream& out, const GridResult& result) {
  out << kGridTsvHeader << '\n';
  std::size_t rank = 0;
  for (const auto& r : result.rows) {
    out << ++rank << '\t' << r.time_step << '\t' << r.units << '\t' << format_double(r.learning_rate)
        << '\t' << (r.feasible ? 1 : 0) << '\t'
        << (r.feasible ? format_double(r.mean_accuracy) : std::string("nan")) << '\t'
        << (r.feasible ? format_double(r.mean_fit_seconds) : std::string("nan")) << '\t';
    for (std::size_t f = 0; f < r.fold_accuracies.size(); ++f) {
      out << (f ? "," : "") << format_double(r.fold_accuracies[f]);
    }
    out << '\t' << r.note << '\n';
  }
}

std::vector<GridRow> read_grid_tsv(std::istream& in) {
  std::vector<GridRow> rows;
  std::string line;
  std::size_t line_no = 0;
  const auto bad = [&](const std::string& what) {
    fail(ErrorKind::Parse, "grid line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kGridTsvHeader) bad("unexpected header");
      continue;
    }
    if (trim(line).empty()) continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 9) bad("expected 9 fields");
    GridRow r;
    const auto t = parse_finite(f[1]);
    const auto n = parse_finite(f[2]);
    const auto a = parse_finite(f[3]);
    if (!t || !n || !a || *t < 1 || *n < 1) bad("bad hyperparameters");
    r.time_step = static_cast<std::size_t>(*t);
    r.units = static_cast<std::size_t>(*n);
    r.learning_rate = *a;
    r.feasible = f[4] == "1";
    if (r.feasible) {
      const auto m = parse_finite(f[5]);
      const auto s = parse_finite(f[6]);
      if (!m || !s) bad("bad accuracy or time");
      r.mean_accuracy = *m;
      r.mean_fit_seconds = *s;
      for (const auto& acc : split_fields(f[7], ',')) {
        const auto v = parse_finite(acc);
        if (!v) bad("bad fold accuracy");
        r.fold_accuracies.push_back(*v);
      }
    }
    r.note = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace qarwarn
