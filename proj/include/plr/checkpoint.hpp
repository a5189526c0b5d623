#pragma once

#include <filesystem>

#include "plr/data_io.hpp"
#include "plr/trainer.hpp"

namespace plr {

// Model parameters, pseudo-label state, shuffle RNG state and history of a
// training run, as JSON. Doubles are written in shortest round-trip form, so
// save -> load reproduces the state exactly.
struct Checkpoint {
  TrainConfig config;
  TrainState state;
};

Json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const Json& j);

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& p);

// Training log CSV: one row per epoch.
std::string training_log_csv(const TrainHistory& h);

}  // namespace plr
