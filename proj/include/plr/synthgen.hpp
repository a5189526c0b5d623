#pragma once

#include <cstddef>
#include <cstdint>

#include "plr/core_data.hpp"

namespace plr {

struct SynthSpec {
  std::size_t n_instances = 1000;
  std::size_t n_classes = 10;
  std::size_t feature_dim = 32;
  double positive_rate = 0.3;  // per-cell probability of a positive label
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Each class gets a random unit prototype; an instance's features are the sum
// of the prototypes of its positive classes plus isotropic Gaussian noise.
// Labels are full. Rows without any positive are allowed.
Dataset gen_synthetic(const SynthSpec& spec);

}  // namespace plr
