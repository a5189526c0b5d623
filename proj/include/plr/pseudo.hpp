#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "plr/core_data.hpp"

namespace plr {

// Weights of the three most recent epoch predictions, newest first.
struct PseudoWeights {
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 0.2;

  void validate() const;
  bool operator==(const PseudoWeights&) const = default;
};

// The last three epoch predictions for one cell, newest first.
class HistoryStack {
 public:
  static constexpr std::size_t kCapacity = 3;

  void push(double prediction);
  std::size_t size() const noexcept { return size_; }
  bool full() const noexcept { return size_ == kCapacity; }
  double operator[](std::size_t k) const;
  double min() const;
  double max() const;

  bool operator==(const HistoryStack&) const = default;

 private:
  std::array<double, kCapacity> entries_{};
  std::size_t size_ = 0;
};

// Pseudo-labels for the Unknown cells of a label matrix. Entries are stored
// row-major in ascending (instance, class) order and exist exactly on the
// Unknown cells of the matrix they were initialised from.
class PseudoState {
 public:
  PseudoState() = default;

  // Every Unknown cell starts at 1 with an empty stack.
  static PseudoState init(const TriStateLabelMatrix& m, PseudoWeights w);

  // Rebuilds a state from serialized parts; validates shape and ranges.
  static PseudoState restore(const TriStateLabelMatrix& m, PseudoWeights w,
                             std::vector<double> values, std::vector<HistoryStack> stacks);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t n_instances() const noexcept { return n_instances_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  const PseudoWeights& weights() const noexcept { return weights_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const HistoryStack> stacks() const noexcept { return stacks_; }
  std::span<const double> row_values(std::size_t i) const;
  std::span<const std::size_t> row_classes(std::size_t i) const;
  double value(std::size_t i, std::size_t c) const;
  const HistoryStack& stack(std::size_t i, std::size_t c) const;

  // Pushes preds(i, c) onto the stack of every Unknown cell (i, c).
  void push_predictions(const Matrix& preds);

  // Cells with a full stack get alpha*S[0] + beta*S[1] + gamma*S[2]; others
  // keep their current value.
  void update();

  double mean_value() const;

  bool operator==(const PseudoState&) const = default;

 private:
  std::size_t entry_index(std::size_t i, std::size_t c) const;

  std::size_t n_instances_ = 0;
  std::size_t n_classes_ = 0;
  PseudoWeights weights_;
  std::vector<std::size_t> row_begin_;  // n_instances + 1 offsets into entries
  std::vector<std::size_t> classes_;
  std::vector<double> values_;
  std::vector<HistoryStack> stacks_;
};

}  // namespace plr
