#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plr/attacks.hpp"
#include "plr/data_io.hpp"
#include "plr/eval.hpp"
#include "plr/trainer.hpp"

namespace plr {

// One attack setting of a sweep. `clean` trains on the unattacked labels and
// provides the baseline for the robustness report.
struct SweepAttack {
  bool clean = false;
  AttackKind kind = AttackKind::Targeted;
  double q = 0.0;

  std::string label() const;  // clean, Ts, T0.4, R0.2
  std::string kind_name() const;
};

struct SweepConfig {
  std::filesystem::path dataset_dir;  // holds train/val/test manifests
  std::vector<SweepAttack> attacks;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  HparamGrid grid;
  TrainConfig base;  // method, seed, learning_rate and batch_size are overridden per cell
  std::filesystem::path out_dir;
  std::size_t jobs = 1;

  void validate() const;
};

// Paths inside the JSON are resolved against `base_dir`.
SweepConfig sweep_config_from_json(const Json& j, const std::filesystem::path& base_dir);

struct CellResult {
  SweepAttack attack;
  Method method = Method::Ours;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  double val_map = 0.0;
  double test_map = 0.0;
};

struct SweepOutcome {
  std::size_t executed = 0;
  std::size_t reused = 0;
  std::vector<CellResult> cells;  // factorial order: attack, method, seed
};

// Runs every (attack, method, seed) cell not already present under
// out_dir/cells, then writes the aggregate outputs.
SweepOutcome run_sweep(const SweepConfig& cfg);

struct AggregateRow {
  SweepAttack attack;
  Method method = Method::Ours;
  std::size_t n_seeds = 0;
  double mean_map = 0.0;
  double std_map = 0.0;  // sample standard deviation; 0 for a single seed
};

std::vector<AggregateRow> aggregate_cells(const std::vector<CellResult>& cells);

// Writes observations.csv, aggregate.csv, table.txt and, when every method
// has a clean baseline, robustness.csv / robustness.txt.
void write_sweep_report(const std::vector<CellResult>& cells, const std::filesystem::path& out_dir);

// Reads every cell file under out_dir/cells.
std::vector<CellResult> load_cells(const std::filesystem::path& out_dir);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace plr
