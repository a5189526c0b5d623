#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "plr/core_data.hpp"
#include "plr/pseudo.hpp"

namespace plr {

enum class PenaltyMode { AllClasses, ObservedOnly, Off };
// How the pseudo-label term is weighted over epochs.
enum class AttentionShift { Exponential, Linear, Off };
// Training objective. Bce scores observed cells only; An reads Unknown as
// Negative; Wan additionally down-weights those cells; BceLs is An with
// smoothed targets.
enum class Method { Ours, An, Wan, Bce, BceLs };

std::string_view to_string(PenaltyMode m) noexcept;
std::string_view to_string(AttentionShift s) noexcept;
std::string_view to_string(Method m) noexcept;
PenaltyMode parse_penalty_mode(std::string_view s);
AttentionShift parse_attention_shift(std::string_view s);
Method parse_method(std::string_view s);

struct LossConfig {
  PseudoWeights weights;  // alpha, beta, gamma
  int n_t = 10;
  double clamp_eps = 1e-7;
  PenaltyMode penalty_mode = PenaltyMode::AllClasses;
  double penalty_eps = 1e-12;
  std::optional<double> wan_weight;  // unset: 1 / (C - 1)
  double ls_eps = 0.1;
  AttentionShift shift = AttentionShift::Exponential;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double observed_term = 0.0;
  double pseudo_term = 0.0;
  double attention_weight = 0.0;
  double penalty_term = 0.0;
  double total = 0.0;
};

// Mean binary cross-entropy over L = preds.size() cells; predictions are
// clamped to [clamp_eps, 1 - clamp_eps] before the logs. Targets may be soft.
double bce(std::span<const double> preds, std::span<const double> targets, double clamp_eps);
std::vector<double> bce_grad(std::span<const double> preds, std::span<const double> targets,
                             double clamp_eps);

// exp(n_c - n_t) for 1 <= n_c <= n_t.
double attention_weight(int n_c, int n_t);
double attention_weight(int n_c, int n_t, AttentionShift shift);

// 1 - sqrt(penalty_eps + mean of p_i^2 over D), clamped to [0, 1]: the
// distance of the predictions from the all-negative trivial solution, turned
// into a penalty. D is every class (AllClasses) or `observed` (ObservedOnly).
double penalty(std::span<const double> preds, std::span<const std::size_t> observed,
               PenaltyMode mode, double penalty_eps);
std::vector<double> penalty_grad(std::span<const double> preds,
                                 std::span<const std::size_t> observed, PenaltyMode mode,
                                 double penalty_eps);

// Full objective for one instance: BCE against ground truth on observed
// cells, attention-weighted BCE against pseudo-labels on Unknown cells, plus
// the trivial-solution penalty. `pseudo` holds the row's pseudo-labels in
// ascending class order of its Unknown cells.
LossBreakdown total_loss(std::span<const double> preds, std::span<const LabelState> labels,
                         std::span<const double> pseudo, int n_c, const LossConfig& cfg);
std::vector<double> total_loss_grad(std::span<const double> preds,
                                    std::span<const LabelState> labels,
                                    std::span<const double> pseudo, int n_c,
                                    const LossConfig& cfg);

double an_loss(std::span<const double> preds, std::span<const LabelState> labels,
               const LossConfig& cfg);
std::vector<double> an_loss_grad(std::span<const double> preds,
                                 std::span<const LabelState> labels, const LossConfig& cfg);

double wan_loss(std::span<const double> preds, std::span<const LabelState> labels,
                const LossConfig& cfg);
std::vector<double> wan_loss_grad(std::span<const double> preds,
                                  std::span<const LabelState> labels, const LossConfig& cfg);

double bce_ls_loss(std::span<const double> preds, std::span<const LabelState> labels,
                   const LossConfig& cfg);
std::vector<double> bce_ls_loss_grad(std::span<const double> preds,
                                     std::span<const LabelState> labels, const LossConfig& cfg);

// BCE restricted to observed cells; 0 for a row with nothing observed.
double observed_bce_loss(std::span<const double> preds, std::span<const LabelState> labels,
                         const LossConfig& cfg);
std::vector<double> observed_bce_loss_grad(std::span<const double> preds,
                                           std::span<const LabelState> labels,
                                           const LossConfig& cfg);

// Per-instance dispatch used by the trainer. For methods other than Ours
// the breakdown carries the loss in observed_term and total only.
struct InstanceLoss {
  LossBreakdown breakdown;
  std::vector<double> grad;
};
InstanceLoss method_loss(Method method, std::span<const double> preds,
                         std::span<const LabelState> labels, std::span<const double> pseudo,
                         int n_c, const LossConfig& cfg);

}  // namespace plr
