#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "plr/core_data.hpp"

namespace plr {

struct Arch {
  enum class Kind { Linear, OneHidden };
  Kind kind = Kind::Linear;
  std::size_t hidden_dim = 0;  // OneHidden only

  static Arch linear() { return {Kind::Linear, 0}; }
  static Arch one_hidden(std::size_t h) { return {Kind::OneHidden, h}; }
  bool operator==(const Arch&) const = default;
};

std::string to_string(const Arch& a);
Arch parse_arch(const std::string& s);  // "linear" or "hidden:<n>"

// Linear:    sigmoid(x W1 + b1), W1 is feature_dim x n_classes.
// OneHidden: sigmoid(tanh(x W1 + b1) W2 + b2).
// The same struct holds parameter gradients.
struct ModelParams {
  Arch arch;
  std::size_t feature_dim = 0;
  std::size_t n_classes = 0;
  Matrix w1;
  Vector b1;
  Matrix w2;  // empty for Linear
  Vector b2;  // empty for Linear

  bool all_finite() const;
  ModelParams zeros_like() const;
  bool operator==(const ModelParams& o) const;
};

ModelParams init_model(Arch arch, std::size_t feature_dim, std::size_t n_classes,
                       std::uint64_t seed);

// Row i of the result holds the class probabilities of row i of x.
Matrix forward(const ModelParams& p, const Matrix& x);

// Gradients of a loss with respect to every parameter, given the loss
// gradient with respect to the predictions forward(p, x).
ModelParams backward(const ModelParams& p, const Matrix& x, const Matrix& dl_dpred);

// p - lr * grads. Throws TrainingDiverged on non-finite gradients.
ModelParams sgd_step(const ModelParams& p, const ModelParams& grads, double lr);

}  // namespace plr
