#include "plr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plr/errors.hpp"

namespace plr {
namespace {

void check_probabilities(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError(std::string(what) + " outside [0,1]");
  }
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError("prediction and label sizes differ");
}

// Weighted BCE sum over cells; weights may be empty (all 1).
double bce_sum(std::span<const double> preds, std::span<const double> targets,
               std::span<const double> weights, double eps) {
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = std::clamp(preds[i], eps, 1.0 - eps);
    const double t = targets[i];
    const double term = t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    sum -= weights.empty() ? term : weights[i] * term;
  }
  return sum;
}

// d(bce_sum)/dp scaled by `scale`, accumulated into out.
void bce_sum_grad(std::span<const double> preds, std::span<const double> targets,
                  std::span<const double> weights, double eps, double scale,
                  std::span<double> out) {
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = preds[i];
    if (p < eps || p > 1.0 - eps) continue;  // clamp active: flat
    const double t = targets[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    out[i] += -scale * w * (t / p - (1.0 - t) / (1.0 - p));
  }
}

double binary_target(LabelState s) { return s == LabelState::Positive ? 1.0 : 0.0; }

// Targets for the assume-negative family; Unknown reads as 0.
std::vector<double> assume_negative_targets(std::span<const LabelState> labels, double ls_eps) {
  std::vector<double> t(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    t[i] = binary_target(labels[i]) * (1.0 - ls_eps) + ls_eps / 2.0;
  }
  return t;
}

double resolved_wan_weight(const LossConfig& cfg, std::size_t n_classes) {
  if (cfg.wan_weight) return *cfg.wan_weight;
  if (n_classes < 2) {
    throw ValidationError("WAN default weight 1/(C-1) undefined for C = 1; set wan_weight");
  }
  return 1.0 / static_cast<double>(n_classes - 1);
}

std::vector<double> wan_weights(std::span<const LabelState> labels, const LossConfig& cfg) {
  const double w = resolved_wan_weight(cfg, labels.size());
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = is_known(labels[i]) ? 1.0 : w;
  return out;
}

// Split of one row into observed (E) and Unknown (N) cells.
struct RowParts {
  std::vector<std::size_t> observed_idx;
  std::vector<double> observed_preds;
  std::vector<double> observed_targets;
  std::vector<std::size_t> unknown_idx;
  std::vector<double> unknown_preds;
};

RowParts split_row(std::span<const double> preds, std::span<const LabelState> labels) {
  RowParts r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (is_known(labels[i])) {
      r.observed_idx.push_back(i);
      r.observed_preds.push_back(preds[i]);
      r.observed_targets.push_back(binary_target(labels[i]));
    } else {
      r.unknown_idx.push_back(i);
      r.unknown_preds.push_back(preds[i]);
    }
  }
  return r;
}

RowParts checked_parts(std::span<const double> preds, std::span<const LabelState> labels,
                       std::span<const double> pseudo) {
  check_same_size(preds.size(), labels.size());
  check_probabilities(preds, "prediction");
  check_probabilities(pseudo, "pseudo-label");
  RowParts r = split_row(preds, labels);
  if (pseudo.size() != r.unknown_idx.size()) {
    throw ValidationError("pseudo-labels must cover exactly the Unknown cells of the row");
  }
  if (r.observed_idx.empty() && r.unknown_idx.empty()) {
    throw ValidationError("instance carries no training signal");
  }
  return r;
}

}  // namespace

std::string_view to_string(PenaltyMode m) noexcept {
  switch (m) {
    case PenaltyMode::AllClasses: return "all_classes";
    case PenaltyMode::ObservedOnly: return "observed_only";
    case PenaltyMode::Off: return "off";
  }
  return "?";
}

std::string_view to_string(AttentionShift s) noexcept {
  switch (s) {
    case AttentionShift::Exponential: return "exponential";
    case AttentionShift::Linear: return "linear";
    case AttentionShift::Off: return "off";
  }
  return "?";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Ours: return "ours";
    case Method::An: return "an";
    case Method::Wan: return "wan";
    case Method::Bce: return "bce";
    case Method::BceLs: return "bce_ls";
  }
  return "?";
}

PenaltyMode parse_penalty_mode(std::string_view s) {
  if (s == "all_classes") return PenaltyMode::AllClasses;
  if (s == "observed_only") return PenaltyMode::ObservedOnly;
  if (s == "off") return PenaltyMode::Off;
  throw ValidationError("unknown penalty mode '" + std::string(s) + "'");
}

AttentionShift parse_attention_shift(std::string_view s) {
  if (s == "exponential") return AttentionShift::Exponential;
  if (s == "linear") return AttentionShift::Linear;
  if (s == "off") return AttentionShift::Off;
  throw ValidationError("unknown attention shift '" + std::string(s) + "'");
}

Method parse_method(std::string_view s) {
  if (s == "ours") return Method::Ours;
  if (s == "an") return Method::An;
  if (s == "wan") return Method::Wan;
  if (s == "bce") return Method::Bce;
  if (s == "bce_ls" || s == "bce-ls") return Method::BceLs;
  throw ValidationError("unknown method '" + std::string(s) + "'");
}

void LossConfig::validate() const {
  weights.validate();
  if (n_t < 1) throw ValidationError("n_t must be >= 1");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ValidationError("clamp_eps must lie in (0, 0.5)");
  if (!(penalty_eps >= 0.0)) throw ValidationError("penalty_eps must be >= 0");
  if (!(ls_eps >= 0.0 && ls_eps < 1.0)) throw ValidationError("ls_eps must lie in [0, 1)");
  if (wan_weight && !(*wan_weight > 0.0 && *wan_weight <= 1.0)) {
    throw ValidationError("wan_weight must lie in (0, 1]");
  }
}

double bce(std::span<const double> preds, std::span<const double> targets, double clamp_eps) {
  if (preds.empty()) throw ValidationError("bce over an empty index set");
  check_same_size(preds.size(), targets.size());
  check_probabilities(preds, "prediction");
  check_probabilities(targets, "target");
  return bce_sum(preds, targets, {}, clamp_eps) / static_cast<double>(preds.size());
}

std::vector<double> bce_grad(std::span<const double> preds, std::span<const double> targets,
                             double clamp_eps) {
  if (preds.empty()) throw ValidationError("bce over an empty index set");
  check_same_size(preds.size(), targets.size());
  check_probabilities(preds, "prediction");
  check_probabilities(targets, "target");
  std::vector<double> g(preds.size(), 0.0);
  bce_sum_grad(preds, targets, {}, clamp_eps, 1.0 / static_cast<double>(preds.size()), g);
  return g;
}

double attention_weight(int n_c, int n_t) {
  return attention_weight(n_c, n_t, AttentionShift::Exponential);
}

double attention_weight(int n_c, int n_t, AttentionShift shift) {
  if (n_t < 1 || n_c < 1 || n_c > n_t) {
    throw ValidationError("epoch index " + std::to_string(n_c) + " outside [1, " +
                          std::to_string(n_t) + "]");
  }
  switch (shift) {
    case AttentionShift::Exponential: return std::exp(static_cast<double>(n_c - n_t));
    case AttentionShift::Linear: return static_cast<double>(n_c) / static_cast<double>(n_t);
    case AttentionShift::Off: return 1.0;
  }
  return 1.0;
}

namespace {

struct PenaltyDomain {
  double mean_square = 0.0;
  std::size_t k = 0;
};

PenaltyDomain penalty_domain(std::span<const double> preds, std::span<const std::size_t> observed,
                             PenaltyMode mode) {
  PenaltyDomain d;
  double sum = 0.0;
  if (mode == PenaltyMode::AllClasses) {
    for (double p : preds) sum += p * p;
    d.k = preds.size();
  } else {
    for (auto i : observed) {
      if (i >= preds.size()) throw ValidationError("observed index out of range");
      sum += preds[i] * preds[i];
    }
    d.k = observed.size();
  }
  if (d.k > 0) d.mean_square = sum / static_cast<double>(d.k);
  return d;
}

}  // namespace

double penalty(std::span<const double> preds, std::span<const std::size_t> observed,
               PenaltyMode mode, double penalty_eps) {
  if (mode == PenaltyMode::Off) throw ValidationError("penalty requested with mode off");
  if (preds.empty()) throw ValidationError("penalty over an empty prediction vector");
  check_probabilities(preds, "prediction");
  const auto d = penalty_domain(preds, observed, mode);
  if (d.k == 0) return 1.0;  // nothing observed: treated as fully trivial
  return std::clamp(1.0 - std::sqrt(penalty_eps + d.mean_square), 0.0, 1.0);
}

std::vector<double> penalty_grad(std::span<const double> preds,
                                 std::span<const std::size_t> observed, PenaltyMode mode,
                                 double penalty_eps) {
  if (mode == PenaltyMode::Off) throw ValidationError("penalty requested with mode off");
  if (preds.empty()) throw ValidationError("penalty over an empty prediction vector");
  check_probabilities(preds, "prediction");
  std::vector<double> g(preds.size(), 0.0);
  const auto d = penalty_domain(preds, observed, mode);
  if (d.k == 0) return g;
  const double root = std::sqrt(penalty_eps + d.mean_square);
  const double raw = 1.0 - root;
  if (raw <= 0.0 || raw >= 1.0 || root == 0.0) return g;  // clamped
  const double scale = -1.0 / (static_cast<double>(d.k) * root);
  if (mode == PenaltyMode::AllClasses) {
    for (std::size_t i = 0; i < preds.size(); ++i) g[i] = scale * preds[i];
  } else {
    for (auto i : observed) g[i] = scale * preds[i];
  }
  return g;
}

LossBreakdown total_loss(std::span<const double> preds, std::span<const LabelState> labels,
                         std::span<const double> pseudo, int n_c, const LossConfig& cfg) {
  const RowParts r = checked_parts(preds, labels, pseudo);
  LossBreakdown b;
  if (!r.observed_idx.empty()) {
    b.observed_term = bce_sum(r.observed_preds, r.observed_targets, {}, cfg.clamp_eps) /
                      static_cast<double>(r.observed_idx.size());
  }
  if (!r.unknown_idx.empty()) {
    b.pseudo_term = bce_sum(r.unknown_preds, pseudo, {}, cfg.clamp_eps) /
                    static_cast<double>(r.unknown_idx.size());
  }
  b.attention_weight = attention_weight(n_c, cfg.n_t, cfg.shift);
  if (cfg.penalty_mode != PenaltyMode::Off) {
    b.penalty_term = penalty(preds, r.observed_idx, cfg.penalty_mode, cfg.penalty_eps);
  }
  b.total = b.observed_term + b.attention_weight * b.pseudo_term + b.penalty_term;
  return b;
}

std::vector<double> total_loss_grad(std::span<const double> preds,
                                    std::span<const LabelState> labels,
                                    std::span<const double> pseudo, int n_c,
                                    const LossConfig& cfg) {
  const RowParts r = checked_parts(preds, labels, pseudo);
  std::vector<double> g(preds.size(), 0.0);
  if (!r.observed_idx.empty()) {
    std::vector<double> part(r.observed_idx.size(), 0.0);
    bce_sum_grad(r.observed_preds, r.observed_targets, {}, cfg.clamp_eps,
                 1.0 / static_cast<double>(r.observed_idx.size()), part);
    for (std::size_t j = 0; j < part.size(); ++j) g[r.observed_idx[j]] += part[j];
  }
  if (!r.unknown_idx.empty()) {
    const double w = attention_weight(n_c, cfg.n_t, cfg.shift);
    std::vector<double> part(r.unknown_idx.size(), 0.0);
    bce_sum_grad(r.unknown_preds, pseudo, {}, cfg.clamp_eps,
                 w / static_cast<double>(r.unknown_idx.size()), part);
    for (std::size_t j = 0; j < part.size(); ++j) g[r.unknown_idx[j]] += part[j];
  }
  if (cfg.penalty_mode != PenaltyMode::Off) {
    auto pg = penalty_grad(preds, r.observed_idx, cfg.penalty_mode, cfg.penalty_eps);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += pg[i];
  }
  return g;
}

double an_loss(std::span<const double> preds, std::span<const LabelState> labels,
               const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  return bce(preds, assume_negative_targets(labels, 0.0), cfg.clamp_eps);
}

std::vector<double> an_loss_grad(std::span<const double> preds,
                                 std::span<const LabelState> labels, const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  return bce_grad(preds, assume_negative_targets(labels, 0.0), cfg.clamp_eps);
}

double wan_loss(std::span<const double> preds, std::span<const LabelState> labels,
                const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  if (preds.empty()) throw ValidationError("wan_loss over an empty row");
  check_probabilities(preds, "prediction");
  const auto targets = assume_negative_targets(labels, 0.0);
  const auto weights = wan_weights(labels, cfg);
  return bce_sum(preds, targets, weights, cfg.clamp_eps) / static_cast<double>(preds.size());
}

std::vector<double> wan_loss_grad(std::span<const double> preds,
                                  std::span<const LabelState> labels, const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  if (preds.empty()) throw ValidationError("wan_loss over an empty row");
  check_probabilities(preds, "prediction");
  const auto targets = assume_negative_targets(labels, 0.0);
  const auto weights = wan_weights(labels, cfg);
  std::vector<double> g(preds.size(), 0.0);
  bce_sum_grad(preds, targets, weights, cfg.clamp_eps, 1.0 / static_cast<double>(preds.size()),
               g);
  return g;
}

double bce_ls_loss(std::span<const double> preds, std::span<const LabelState> labels,
                   const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  return bce(preds, assume_negative_targets(labels, cfg.ls_eps), cfg.clamp_eps);
}

std::vector<double> bce_ls_loss_grad(std::span<const double> preds,
                                     std::span<const LabelState> labels, const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  return bce_grad(preds, assume_negative_targets(labels, cfg.ls_eps), cfg.clamp_eps);
}

double observed_bce_loss(std::span<const double> preds, std::span<const LabelState> labels,
                         const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  check_probabilities(preds, "prediction");
  const RowParts r = split_row(preds, labels);
  if (r.observed_idx.empty()) return 0.0;
  return bce_sum(r.observed_preds, r.observed_targets, {}, cfg.clamp_eps) /
         static_cast<double>(r.observed_idx.size());
}

std::vector<double> observed_bce_loss_grad(std::span<const double> preds,
                                           std::span<const LabelState> labels,
                                           const LossConfig& cfg) {
  check_same_size(preds.size(), labels.size());
  check_probabilities(preds, "prediction");
  const RowParts r = split_row(preds, labels);
  std::vector<double> g(preds.size(), 0.0);
  if (r.observed_idx.empty()) return g;
  std::vector<double> part(r.observed_idx.size(), 0.0);
  bce_sum_grad(r.observed_preds, r.observed_targets, {}, cfg.clamp_eps,
               1.0 / static_cast<double>(r.observed_idx.size()), part);
  for (std::size_t j = 0; j < part.size(); ++j) g[r.observed_idx[j]] += part[j];
  return g;
}

InstanceLoss method_loss(Method method, std::span<const double> preds,
                         std::span<const LabelState> labels, std::span<const double> pseudo,
                         int n_c, const LossConfig& cfg) {
  InstanceLoss out;
  auto baseline = [&](double value, std::vector<double> grad) {
    out.breakdown.observed_term = value;
    out.breakdown.total = value;
    out.grad = std::move(grad);
  };
  switch (method) {
    case Method::Ours:
      out.breakdown = total_loss(preds, labels, pseudo, n_c, cfg);
      out.grad = total_loss_grad(preds, labels, pseudo, n_c, cfg);
      break;
    case Method::An: baseline(an_loss(preds, labels, cfg), an_loss_grad(preds, labels, cfg)); break;
    case Method::Wan:
      baseline(wan_loss(preds, labels, cfg), wan_loss_grad(preds, labels, cfg));
      break;
    case Method::Bce:
      baseline(observed_bce_loss(preds, labels, cfg), observed_bce_loss_grad(preds, labels, cfg));
      break;
    case Method::BceLs:
      baseline(bce_ls_loss(preds, labels, cfg), bce_ls_loss_grad(preds, labels, cfg));
      break;
  }
  return out;
}

}  // namespace plr
