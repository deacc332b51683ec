#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <fstream>
#include <sstream>

#include "qarwarn/error.hpp"
#include "qarwarn/pipeline.hpp"
#include "qarwarn/text_io.hpp"

using namespace qarwarn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qarwarn_test_" + name);
  fs::remove_all(dir);
  return dir;
}

void run_chain(const RunContext& ctx, std::size_t epochs) {
  cmd_synth(ctx, {800, 6, 0.02, 2});
  cmd_ingest(ctx, {});
  cmd_label(ctx, {});
  cmd_select(ctx, {});
  TrainOptions t;
  t.time_step = 5;
  t.config.units = 6;
  t.config.epochs = epochs;
  t.config.learning_rate = 0.01;
  cmd_train(ctx, t);
}

}  // namespace

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code(ErrorKind::Argument), 2);
  EXPECT_EQ(exit_code(ErrorKind::Parse), 3);
  EXPECT_EQ(exit_code(ErrorKind::Schema), 4);
  EXPECT_EQ(exit_code(ErrorKind::Numeric), 5);
  EXPECT_EQ(exit_code(ErrorKind::Io), 6);
  EXPECT_EQ(exit_code(ErrorKind::DegenerateData), 7);
}

TEST(Pipeline, ChainIsByteReproducible) {
  const RunContext a{fresh_dir("chain_a"), 11};
  const RunContext b{fresh_dir("chain_b"), 11};
  run_chain(a, 4);
  run_chain(b, 4);
  EXPECT_TRUE(cmd_evaluate(a, {}));
  EXPECT_TRUE(cmd_evaluate(b, {}));
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.run_dir)) {
    const auto name = entry.path().filename();
    ASSERT_TRUE(fs::exists(b.run_dir / name)) << name;
    EXPECT_EQ(read_file(entry.path()), read_file(b.run_dir / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 18u);
}

TEST(Pipeline, WarnReplaysTableAndAlertsNearSpikes) {
  const RunContext ctx{fresh_dir("warn"), 5};
  run_chain(ctx, 25);
  std::ostringstream out;
  const auto lines = cmd_warn(ctx, {}, out);
  EXPECT_EQ(lines, 1600u + 2u);  // one extra forecast per flight

  std::set<long> spike_seconds;
  {
    std::istringstream in(read_file(ctx.run_dir / "spikes.txt"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream f(line);
      long flight = 0, second = 0;
      f >> flight >> second;
      if (flight == 0) spike_seconds.insert(second);
    }
  }
  ASSERT_FALSE(spike_seconds.empty());
  std::istringstream in(out.str());
  std::string line;
  std::size_t near = 0;
  std::size_t seen = 0;
  while (std::getline(in, line) && seen++ < 805) {
    if (line.find("ALERT") == std::string::npos) continue;
    const long ts = std::stol(line.substr(0, line.find('\t')));
    for (const long s : spike_seconds) near += std::abs(ts - s) <= 3;
  }
  EXPECT_GT(near, 0u);
}

TEST(Pipeline, MissingInputsRaiseIo) {
  const RunContext ctx{fresh_dir("missing"), 1};
  fs::create_directories(ctx.run_dir);
  for (const auto& f : std::vector<std::function<void()>>{
           [&] { cmd_ingest(ctx, {}); }, [&] { cmd_label(ctx, {}); },
           [&] { cmd_train(ctx, {}); }, [&] { cmd_evaluate(ctx, {}); }}) {
    try {
      f();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Io);
    }
  }
}

TEST(Pipeline, TrainFromGridUsesTopRow) {
  const RunContext ctx{fresh_dir("grid"), 3};
  cmd_synth(ctx, {400, 4, 0.03, 1});
  cmd_ingest(ctx, {});
  cmd_label(ctx, {});
  cmd_select(ctx, {});
  GridOptions g;
  g.spec.time_steps = {3, 4};
  g.spec.units = {3};
  g.spec.learning_rates = {0.01};
  g.spec.epochs = 1;
  g.spec.folds = 2;
  cmd_gridsearch(ctx, g);
  TrainOptions t;
  t.from_grid = true;
  t.config.epochs = 1;
  cmd_train(ctx, t);
  std::istringstream grid(read_file(ctx.run_dir / "grid.tsv"));
  const auto rows = read_grid_tsv(grid);
  std::istringstream model_in(read_file(ctx.run_dir / "model.json"));
  const auto model = load_model(model_in);
  EXPECT_EQ(model.time_step, rows.front().time_step);
  EXPECT_EQ(model.params.units(), rows.front().units);
}
