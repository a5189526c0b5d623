#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "plr/core_data.hpp"

namespace plr {

// Label-removal attacks. Every attack maps a full label matrix to a partial
// one; cells only ever go from Positive/Negative to Unknown. Each instance
// draws from its own sub-seed, so results do not depend on iteration order.

enum class AttackKind { Targeted, Random, SinglePositive };

std::string_view to_string(AttackKind k) noexcept;
AttackKind parse_attack_kind(std::string_view s);

struct AttackSpec {
  AttackKind kind = AttackKind::Targeted;
  double q = 0.0;  // ignored for SinglePositive
  std::uint64_t seed = 0;
};

struct AttackResult {
  TriStateLabelMatrix labels;
  std::vector<std::string> warnings;  // one line per event, written to the attack log
};

// Number of cells removed from a group of `n` under rate q: floor(q*n + 0.5).
std::size_t removal_count(double q, std::size_t n);

// All negatives removed, and round-half-up(q * p_i) positives of each instance.
TriStateLabelMatrix targeted_attack(const TriStateLabelMatrix& m, double q, std::uint64_t seed);

// round-half-up(q * C) cells of each instance removed regardless of sign.
TriStateLabelMatrix random_attack(const TriStateLabelMatrix& m, double q, std::uint64_t seed);

// Keeps one uniformly chosen positive per instance. Instances without any
// positive become all-Unknown and produce a warning.
AttackResult single_positive_attack(const TriStateLabelMatrix& m, std::uint64_t seed);

AttackResult apply_attack(const AttackSpec& spec, const TriStateLabelMatrix& m);

// (t_n + q * t_p) / t: fraction of all labels a targeted attack at rate q deletes.
double effective_removal_rate(const LabelCounts& c, double q);

}  // namespace plr
