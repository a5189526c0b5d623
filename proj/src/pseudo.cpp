#include "plr/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plr/errors.hpp"

namespace plr {

void PseudoWeights::validate() const {
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0)) {
    throw ValidationError("pseudo-label weights must be non-negative");
  }
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-12) {
    throw ValidationError("pseudo-label weights must sum to 1");
  }
}

void HistoryStack::push(double prediction) {
  if (!(prediction >= 0.0 && prediction <= 1.0)) {
    throw ValidationError("prediction outside [0,1] pushed to history stack");
  }
  for (std::size_t k = kCapacity - 1; k > 0; --k) entries_[k] = entries_[k - 1];
  entries_[0] = prediction;
  size_ = std::min(size_ + 1, kCapacity);
}

double HistoryStack::operator[](std::size_t k) const {
  if (k >= size_) throw ValidationError("history stack index out of range");
  return entries_[k];
}

double HistoryStack::min() const {
  if (size_ == 0) throw ValidationError("empty history stack");
  return *std::min_element(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(size_));
}

double HistoryStack::max() const {
  if (size_ == 0) throw ValidationError("empty history stack");
  return *std::max_element(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(size_));
}

PseudoState PseudoState::init(const TriStateLabelMatrix& m, PseudoWeights w) {
  w.validate();
  PseudoState s;
  s.n_instances_ = m.n_instances();
  s.n_classes_ = m.n_classes();
  s.weights_ = w;
  s.row_begin_.reserve(m.n_instances() + 1);
  for (std::size_t i = 0; i < m.n_instances(); ++i) {
    s.row_begin_.push_back(s.classes_.size());
    auto row = m.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] == LabelState::Unknown) s.classes_.push_back(c);
    }
  }
  s.row_begin_.push_back(s.classes_.size());
  s.values_.assign(s.classes_.size(), 1.0);
  s.stacks_.assign(s.classes_.size(), HistoryStack{});
  return s;
}

PseudoState PseudoState::restore(const TriStateLabelMatrix& m, PseudoWeights w,
                                 std::vector<double> values, std::vector<HistoryStack> stacks) {
  PseudoState s = init(m, w);
  if (values.size() != s.size() || stacks.size() != s.size()) {
    throw ValidationError("pseudo state size does not match the Unknown cell count");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("pseudo-label value outside [0,1]");
  }
  s.values_ = std::move(values);
  s.stacks_ = std::move(stacks);
  return s;
}

std::span<const double> PseudoState::row_values(std::size_t i) const {
  if (i >= n_instances_) throw ValidationError("pseudo row out of range");
  return std::span<const double>(values_).subspan(row_begin_[i], row_begin_[i + 1] - row_begin_[i]);
}

std::span<const std::size_t> PseudoState::row_classes(std::size_t i) const {
  if (i >= n_instances_) throw ValidationError("pseudo row out of range");
  return std::span<const std::size_t>(classes_).subspan(row_begin_[i],
                                                        row_begin_[i + 1] - row_begin_[i]);
}

std::size_t PseudoState::entry_index(std::size_t i, std::size_t c) const {
  auto cls = row_classes(i);
  auto it = std::lower_bound(cls.begin(), cls.end(), c);
  if (it == cls.end() || *it != c) {
    throw ValidationError("no pseudo-label at (" + std::to_string(i) + ", " + std::to_string(c) +
                          "): cell is not Unknown");
  }
  return row_begin_[i] + static_cast<std::size_t>(it - cls.begin());
}

double PseudoState::value(std::size_t i, std::size_t c) const {
  return values_[entry_index(i, c)];
}

const HistoryStack& PseudoState::stack(std::size_t i, std::size_t c) const {
  return stacks_[entry_index(i, c)];
}

void PseudoState::push_predictions(const Matrix& preds) {
  if (static_cast<std::size_t>(preds.rows()) != n_instances_ ||
      static_cast<std::size_t>(preds.cols()) != n_classes_) {
    throw ValidationError("prediction matrix shape does not match the pseudo state");
  }
  // Validate first so a bad matrix leaves the state untouched.
  for (std::size_t i = 0; i < n_instances_; ++i) {
    for (std::size_t e = row_begin_[i]; e < row_begin_[i + 1]; ++e) {
      double p = preds(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(classes_[e]));
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("prediction outside [0,1]");
    }
  }
  for (std::size_t i = 0; i < n_instances_; ++i) {
    for (std::size_t e = row_begin_[i]; e < row_begin_[i + 1]; ++e) {
      stacks_[e].push(preds(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(classes_[e])));
    }
  }
}

void PseudoState::update() {
  for (std::size_t e = 0; e < stacks_.size(); ++e) {
    const auto& s = stacks_[e];
    if (!s.full()) continue;
    double v = weights_.alpha * s[0] + weights_.beta * s[1] + weights_.gamma * s[2];
    // A convex combination can overshoot [min, max] by an ulp.
    values_[e] = std::clamp(v, s.min(), s.max());
  }
}

double PseudoState::mean_value() const {
  if (values_.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

}  // namespace plr
