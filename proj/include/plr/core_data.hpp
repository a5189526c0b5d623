#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace plr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Observed cells (Positive/Negative) are the "existing" part of an instance's
// labels; Unknown cells are the removed part that pseudo-labels stand in for.
enum class LabelState : std::uint8_t { Negative = 0, Positive = 1, Unknown = 2 };

inline bool is_known(LabelState s) noexcept { return s != LabelState::Unknown; }

class TriStateLabelMatrix {
 public:
  TriStateLabelMatrix(std::size_t n_instances, std::size_t n_classes,
                      LabelState fill = LabelState::Negative);
  TriStateLabelMatrix(std::size_t n_instances, std::size_t n_classes,
                      std::vector<LabelState> cells);

  // Convenience for tests and literals: {{P, N}, {U, P}}.
  static TriStateLabelMatrix from_rows(
      std::initializer_list<std::initializer_list<LabelState>> rows);

  std::size_t n_instances() const noexcept { return n_instances_; }
  std::size_t n_classes() const noexcept { return n_classes_; }

  LabelState at(std::size_t i, std::size_t c) const;
  void set(std::size_t i, std::size_t c, LabelState s);

  std::span<const LabelState> row(std::size_t i) const;
  std::span<const LabelState> cells() const noexcept { return cells_; }

  bool is_full() const noexcept;
  std::size_t unknown_count() const noexcept;

  TriStateLabelMatrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const TriStateLabelMatrix&) const = default;

 private:
  std::size_t n_instances_;
  std::size_t n_classes_;
  std::vector<LabelState> cells_;
};

struct LabelCounts {
  std::size_t t = 0;    // known labels
  std::size_t t_p = 0;  // known positives
  std::size_t t_n = 0;  // known negatives
  std::size_t t_u = 0;  // unknown cells

  bool operator==(const LabelCounts&) const = default;
};

LabelCounts count_labels(const TriStateLabelMatrix& m);

struct Dataset {
  Matrix features;  // n_instances x feature_dim
  TriStateLabelMatrix labels;
  std::string name;
  // Role tag ("all", "train", "val", "test"); the attack command refuses "test".
  std::string split = "all";

  Dataset(Matrix features, TriStateLabelMatrix labels, std::string name,
          std::string split = "all");

  std::size_t n_instances() const noexcept { return labels.n_instances(); }
  std::size_t n_classes() const noexcept { return labels.n_classes(); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

  Dataset select_rows(std::span<const std::size_t> rows, std::string split_tag) const;
  Dataset with_labels(TriStateLabelMatrix new_labels) const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded permutation of 0..n-1 cut into floor(train_frac*n), floor(val_frac*n)
// and the remainder.
SplitIndices split_indices(std::size_t n, double train_frac, double val_frac,
                           std::uint64_t seed);

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

DatasetSplit split_dataset(const Dataset& d, double train_frac, double val_frac,
                           std::uint64_t seed);

}  // namespace plr
