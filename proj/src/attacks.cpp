#include "plr/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plr/errors.hpp"
#include "plr/rng.hpp"

namespace plr {
namespace {

void require_full(const TriStateLabelMatrix& m, std::string_view who) {
  if (!m.is_full()) {
    throw ValidationError(std::string(who) + ": input already contains Unknown labels");
  }
}

void require_rate(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("attack rate q must lie in [0,1]");
}

// Fixed stream offsets keep the three attack kinds on unrelated sub-seeds.
constexpr std::uint64_t kTargetedStream = 0x1000'0000ULL;
constexpr std::uint64_t kRandomStream = 0x2000'0000ULL;
constexpr std::uint64_t kSingleStream = 0x3000'0000ULL;

}  // namespace

std::string_view to_string(AttackKind k) noexcept {
  switch (k) {
    case AttackKind::Targeted: return "targeted";
    case AttackKind::Random: return "random";
    case AttackKind::SinglePositive: return "single_positive";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view s) {
  if (s == "targeted") return AttackKind::Targeted;
  if (s == "random") return AttackKind::Random;
  if (s == "single_positive" || s == "single") return AttackKind::SinglePositive;
  throw ValidationError("unknown attack kind '" + std::string(s) + "'");
}

std::size_t removal_count(double q, std::size_t n) {
  require_rate(q);
  auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(n) + 0.5));
  return std::min(k, n);
}

TriStateLabelMatrix targeted_attack(const TriStateLabelMatrix& m, double q, std::uint64_t seed) {
  require_full(m, "targeted_attack");
  require_rate(q);
  TriStateLabelMatrix out = m;
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < m.n_instances(); ++i) {
    positives.clear();
    auto row = m.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] == LabelState::Positive) {
        positives.push_back(c);
      } else {
        out.set(i, c, LabelState::Unknown);
      }
    }
    // The permutation depends only on (seed, i, positive set), so the removed
    // set at rate q is a prefix of the removed set at any larger rate.
    auto eng = make_engine(seed, kTargetedStream + i);
    std::shuffle(positives.begin(), positives.end(), eng);
    const auto k = removal_count(q, positives.size());
    for (std::size_t j = 0; j < k; ++j) out.set(i, positives[j], LabelState::Unknown);
  }
  return out;
}

TriStateLabelMatrix random_attack(const TriStateLabelMatrix& m, double q, std::uint64_t seed) {
  require_full(m, "random_attack");
  require_rate(q);
  TriStateLabelMatrix out = m;
  const std::size_t n_classes = m.n_classes();
  const auto k = removal_count(q, n_classes);
  std::vector<std::size_t> order(n_classes);
  for (std::size_t i = 0; i < m.n_instances(); ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto eng = make_engine(seed, kRandomStream + i);
    std::shuffle(order.begin(), order.end(), eng);
    for (std::size_t j = 0; j < k; ++j) out.set(i, order[j], LabelState::Unknown);
  }
  return out;
}

AttackResult single_positive_attack(const TriStateLabelMatrix& m, std::uint64_t seed) {
  require_full(m, "single_positive_attack");
  AttackResult res{TriStateLabelMatrix(m.n_instances(), m.n_classes(), LabelState::Unknown), {}};
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < m.n_instances(); ++i) {
    positives.clear();
    auto row = m.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] == LabelState::Positive) positives.push_back(c);
    }
    if (positives.empty()) {
      res.warnings.push_back("instance " + std::to_string(i) +
                             ": no positive labels, all labels removed");
      continue;
    }
    auto eng = make_engine(seed, kSingleStream + i);
    std::uniform_int_distribution<std::size_t> pick(0, positives.size() - 1);
    res.labels.set(i, positives[pick(eng)], LabelState::Positive);
  }
  return res;
}

AttackResult apply_attack(const AttackSpec& spec, const TriStateLabelMatrix& m) {
  switch (spec.kind) {
    case AttackKind::Targeted: return {targeted_attack(m, spec.q, spec.seed), {}};
    case AttackKind::Random: return {random_attack(m, spec.q, spec.seed), {}};
    case AttackKind::SinglePositive: return single_positive_attack(m, spec.seed);
  }
  throw ValidationError("unknown attack kind");
}

double effective_removal_rate(const LabelCounts& c, double q) {
  require_rate(q);
  if (c.t == 0) throw ValidationError("effective removal rate undefined for t = 0");
  return (static_cast<double>(c.t_n) + q * static_cast<double>(c.t_p)) /
         static_cast<double>(c.t);
}

}  // namespace plr
