#include <doctest.h>

#include "plr/data_io.hpp"
#include "plr/errors.hpp"
#include "plr/sweep.hpp"
#include "plr/synthgen.hpp"
#include "test_util.hpp"

using namespace plr;
using namespace plr::testing;
namespace fs = std::filesystem;

namespace {

void write_benchmark(const fs::path& dir) {
  SynthSpec s;
  s.n_instances = 120;
  s.n_classes = 3;
  s.feature_dim = 5;
  s.seed = 2;
  const auto sp = split_dataset(gen_synthetic(s), 0.6, 0.2, 2);
  for (const Dataset* d : {&sp.train, &sp.val, &sp.test}) save_dataset(*d, dir);
}

SweepConfig small_sweep(const fs::path& data, const fs::path& out) {
  SweepConfig c;
  c.dataset_dir = data;
  c.attacks = {SweepAttack{false, AttackKind::Targeted, 0.2}, SweepAttack{false, AttackKind::Targeted, 0.6}};
  c.methods = {Method::Ours, Method::An};
  c.seeds = {0, 1};
  c.grid = HparamGrid{{0.1}, {16}};
  c.base.epochs = 3;
  c.out_dir = out;
  c.jobs = 2;
  return c;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("factorial sweep, resume and determinism") {
  TempDir tmp("sweep");
  write_benchmark(tmp.path() / "data");
  const auto cfg = small_sweep(tmp.path() / "data", tmp.path() / "out");

  const auto first = run_sweep(cfg);
  CHECK(first.executed == 8);
  CHECK(first.reused == 0);
  CHECK(first.cells.size() == 8);
  const auto aggregate = read_text_file(cfg.out_dir / "aggregate.csv");
  CHECK(count_lines(aggregate) == 1 + 4);
  const auto table = read_text_file(cfg.out_dir / "table.txt");
  CHECK(count_lines(table) == 2 + 2);
  CHECK(count_lines(read_text_file(cfg.out_dir / "observations.csv")) == 1 + 8);
  CHECK_FALSE(fs::exists(cfg.out_dir / "robustness.csv"));

  std::vector<fs::path> cells;
  for (const auto& e : fs::directory_iterator(cfg.out_dir / "cells")) cells.push_back(e.path());
  std::sort(cells.begin(), cells.end());
  REQUIRE(cells.size() == 8);
  fs::remove(cells[3]);
  const auto second = run_sweep(cfg);
  CHECK(second.executed == 1);
  CHECK(second.reused == 7);
  CHECK(read_text_file(cfg.out_dir / "aggregate.csv") == aggregate);

  const auto third = run_sweep(cfg);
  CHECK(third.executed == 0);
  CHECK(read_text_file(cfg.out_dir / "aggregate.csv") == aggregate);

  // A fresh directory with a different job count reproduces the same bytes.
  auto serial = cfg;
  serial.jobs = 1;
  serial.out_dir = tmp.path() / "out_serial";
  run_sweep(serial);
  CHECK(read_text_file(serial.out_dir / "aggregate.csv") == aggregate);

  // Changing the configuration changes the cell keys.
  auto other = cfg;
  other.base.epochs = 2;
  CHECK(run_sweep(other).executed == 8);
}

TEST_CASE("clean baselines produce a robustness report") {
  TempDir tmp("sweep_clean");
  write_benchmark(tmp.path() / "data");
  auto cfg = small_sweep(tmp.path() / "data", tmp.path() / "out");
  cfg.attacks = {SweepAttack{true, AttackKind::Targeted, 0.0}, SweepAttack{false, AttackKind::SinglePositive, 0.0}};
  cfg.methods = {Method::An};
  cfg.seeds = {0};
  run_sweep(cfg);
  CHECK(fs::exists(cfg.out_dir / "robustness.csv"));
  const auto cells = load_cells(cfg.out_dir);
  CHECK(cells.size() == 2);
}

TEST_CASE("aggregate mean and spread") {
  std::vector<CellResult> cells(2);
  cells[0].seed = 0;
  cells[0].test_map = 0.70;
  cells[1].seed = 1;
  cells[1].test_map = 0.80;
  const auto rows = aggregate_cells(cells);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_seeds == 2);
  CHECK(std::abs(rows[0].mean_map - 0.75) < 1e-15);
  CHECK(std::abs(rows[0].std_map - std::sqrt(0.005)) < 1e-12);
}

TEST_CASE("sweep config parsing") {
  const Json j = Json::parse(R"({
    "dataset": "data",
    "attacks": [{"kind": "clean"}, {"kind": "targeted", "q": [0.2, 0.4]}, {"kind": "single_positive"}],
    "methods": ["ours", "an"],
    "seeds": [0, 1, 2],
    "grid": {"learning_rate": [0.1], "batch_size": [8]},
    "train": {"epochs": 4},
    "out": "results",
    "jobs": 3
  })");
  const auto c = sweep_config_from_json(j, "/base");
  CHECK(c.dataset_dir == fs::path("/base/data"));
  CHECK(c.out_dir == fs::path("/base/results"));
  REQUIRE(c.attacks.size() == 4);
  CHECK(c.attacks[0].label() == "clean");
  CHECK(c.attacks[2].label() == "T0.4");
  CHECK(c.attacks[3].label() == "Ts");
  CHECK(c.seeds.size() == 3);
  CHECK(c.base.epochs == 4);
  CHECK(c.jobs == 3);
  CHECK_THROWS_AS(sweep_config_from_json(Json{{"dataset", "d"}, {"bogus", 1}}, "/"), ValidationError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
