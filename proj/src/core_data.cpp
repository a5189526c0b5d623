#include "plr/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plr/errors.hpp"
#include "plr/rng.hpp"

namespace plr {

TriStateLabelMatrix::TriStateLabelMatrix(std::size_t n_instances, std::size_t n_classes,
                                         LabelState fill)
    : TriStateLabelMatrix(n_instances, n_classes,
                          std::vector<LabelState>(n_instances * n_classes, fill)) {}

TriStateLabelMatrix::TriStateLabelMatrix(std::size_t n_instances, std::size_t n_classes,
                                         std::vector<LabelState> cells)
    : n_instances_(n_instances), n_classes_(n_classes), cells_(std::move(cells)) {
  if (n_instances_ == 0 || n_classes_ == 0) {
    throw ValidationError("label matrix dimensions must be positive");
  }
  if (cells_.size() != n_instances_ * n_classes_) {
    throw ValidationError("label matrix cell count does not match dimensions");
  }
  for (auto s : cells_) {
    if (s != LabelState::Negative && s != LabelState::Positive && s != LabelState::Unknown) {
      throw ValidationError("invalid label state");
    }
  }
}

TriStateLabelMatrix TriStateLabelMatrix::from_rows(
    std::initializer_list<std::initializer_list<LabelState>> rows) {
  const std::size_t n = rows.size();
  const std::size_t c = n == 0 ? 0 : rows.begin()->size();
  std::vector<LabelState> cells;
  cells.reserve(n * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw ValidationError("ragged label rows");
    cells.insert(cells.end(), r.begin(), r.end());
  }
  return TriStateLabelMatrix(n, c, std::move(cells));
}

LabelState TriStateLabelMatrix::at(std::size_t i, std::size_t c) const {
  if (i >= n_instances_ || c >= n_classes_) throw ValidationError("label index out of range");
  return cells_[i * n_classes_ + c];
}

void TriStateLabelMatrix::set(std::size_t i, std::size_t c, LabelState s) {
  if (i >= n_instances_ || c >= n_classes_) throw ValidationError("label index out of range");
  cells_[i * n_classes_ + c] = s;
}

std::span<const LabelState> TriStateLabelMatrix::row(std::size_t i) const {
  if (i >= n_instances_) throw ValidationError("row index out of range");
  return std::span<const LabelState>(cells_).subspan(i * n_classes_, n_classes_);
}

bool TriStateLabelMatrix::is_full() const noexcept { return unknown_count() == 0; }

std::size_t TriStateLabelMatrix::unknown_count() const noexcept {
  return static_cast<std::size_t>(
      std::count(cells_.begin(), cells_.end(), LabelState::Unknown));
}

TriStateLabelMatrix TriStateLabelMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<LabelState> out;
  out.reserve(rows.size() * n_classes_);
  for (auto r : rows) {
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
  }
  return TriStateLabelMatrix(rows.size(), n_classes_, std::move(out));
}

LabelCounts count_labels(const TriStateLabelMatrix& m) {
  LabelCounts c;
  for (auto s : m.cells()) {
    switch (s) {
      case LabelState::Positive: ++c.t_p; break;
      case LabelState::Negative: ++c.t_n; break;
      case LabelState::Unknown: ++c.t_u; break;
    }
  }
  c.t = c.t_p + c.t_n;
  return c;
}

Dataset::Dataset(Matrix f, TriStateLabelMatrix l, std::string n, std::string s)
    : features(std::move(f)), labels(std::move(l)), name(std::move(n)), split(std::move(s)) {
  if (static_cast<std::size_t>(features.rows()) != labels.n_instances()) {
    throw ValidationError("feature rows (" + std::to_string(features.rows()) +
                          ") do not match label rows (" +
                          std::to_string(labels.n_instances()) + ")");
  }
  if (features.cols() == 0) throw ValidationError("feature dimension must be positive");
  if (!features.allFinite()) throw ValidationError("features contain non-finite values");
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows, std::string split_tag) const {
  Matrix f(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    f.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
  }
  return Dataset(std::move(f), labels.select_rows(rows), name, std::move(split_tag));
}

Dataset Dataset::with_labels(TriStateLabelMatrix new_labels) const {
  return Dataset(features, std::move(new_labels), name, split);
}

SplitIndices split_indices(std::size_t n, double train_frac, double val_frac,
                           std::uint64_t seed) {
  auto in_open_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_open_unit(train_frac) || !in_open_unit(val_frac) || train_frac + val_frac >= 1.0) {
    throw ValidationError("split fractions must lie in (0,1) and sum to less than 1");
  }
  if (n < 3) throw ValidationError("need at least 3 instances to split");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto eng = make_engine(seed, 0);
  std::shuffle(perm.begin(), perm.end(), eng);

  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));

  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

DatasetSplit split_dataset(const Dataset& d, double train_frac, double val_frac,
                           std::uint64_t seed) {
  auto idx = split_indices(d.n_instances(), train_frac, val_frac, seed);
  if (idx.train.empty() || idx.val.empty() || idx.test.empty()) {
    throw ValidationError("split produced an empty partition");
  }
  return DatasetSplit{d.select_rows(idx.train, "train"), d.select_rows(idx.val, "val"),
                      d.select_rows(idx.test, "test")};
}

}  // namespace plr
