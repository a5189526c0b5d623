#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plr/core_data.hpp"
#include "plr/loss.hpp"
#include "plr/model.hpp"
#include "plr/pseudo.hpp"
#include "plr/rng.hpp"

namespace plr {

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-2;
  std::size_t batch_size = 16;
  Method method = Method::Ours;
  LossConfig loss_cfg;  // loss_cfg.n_t is overridden by epochs
  std::uint64_t seed = 0;
  Arch arch = Arch::linear();

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  // Means over training instances of the per-instance loss parts; total
  // reconstructs as observed + attention_weight * pseudo + penalty.
  LossBreakdown loss;
  double train_map = 0.0;  // over observed training cells; NaN if unscorable
  double val_map = 0.0;
  std::optional<double> pseudo_mean;  // Ours only
  std::size_t warnings = 0;           // instances with nothing observed under ObservedOnly
};

struct TrainHistory {
  std::vector<EpochRecord> rows;
};

// Everything needed to continue a run bit-exactly.
struct TrainState {
  ModelParams params;
  PseudoState pseudo;
  Engine rng;
  int epochs_done = 0;
  TrainHistory history;
};

TrainState start_training(const Dataset& train, const TrainConfig& cfg);

// Runs up to `count` further epochs (never past cfg.epochs).
void run_epochs(TrainState& state, const Dataset& train, const Dataset& val,
                const TrainConfig& cfg, int count);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  TrainState state;
};

TrainResult train(const Dataset& train, const Dataset& val, const TrainConfig& cfg);

struct HparamGrid {
  std::vector<double> learning_rates;
  std::vector<std::size_t> batch_sizes;

  bool operator==(const HparamGrid&) const = default;
};

struct GridRun {
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  double val_map = 0.0;  // -inf when the run diverged
  std::string failure;
};

struct SearchResult {
  TrainConfig best;
  double best_val_map = 0.0;
  std::vector<GridRun> runs;
  TrainResult best_run;
};

// One run per (lr, batch) pair; keeps the best final validation mAP. Ties go
// to the smaller learning rate, then the smaller batch.
SearchResult hparam_search(const Dataset& train, const Dataset& val, const TrainConfig& base,
                           const HparamGrid& grid);

}  // namespace plr
