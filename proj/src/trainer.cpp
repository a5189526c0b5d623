#include "plr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "plr/errors.hpp"
#include "plr/eval.hpp"

namespace plr {
namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

TrainConfig effective(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.loss_cfg.n_t = cfg.epochs;
  return c;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

std::span<const double> row_span(const Matrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  effective(*this).loss_cfg.validate();
}

TrainState start_training(const Dataset& train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.n_instances() == 0) throw ValidationError("empty training set");
  TrainState s;
  s.params = init_model(cfg.arch, train.feature_dim(), train.n_classes(),
                        mix_seed(cfg.seed, kInitStream));
  if (cfg.method == Method::Ours) s.pseudo = PseudoState::init(train.labels, cfg.loss_cfg.weights);
  s.rng = Engine{mix_seed(cfg.seed, kShuffleStream)};
  return s;
}

void run_epochs(TrainState& state, const Dataset& train, const Dataset& val,
                const TrainConfig& user_cfg, int count) {
  const TrainConfig cfg = effective(user_cfg);
  cfg.validate();
  if (!val.labels.is_full()) throw ValidationError("validation labels must be full");
  if (train.feature_dim() != state.params.feature_dim ||
      train.n_classes() != state.params.n_classes || val.feature_dim() != train.feature_dim() ||
      val.n_classes() != train.n_classes()) {
    throw ValidationError("dataset shapes do not match the model");
  }
  const bool ours = cfg.method == Method::Ours;
  const std::size_t n = train.n_instances();
  std::vector<std::size_t> order(n);
  const std::vector<double> no_pseudo;

  const int last = std::min(cfg.epochs, state.epochs_done + count);
  for (int epoch = state.epochs_done + 1; epoch <= last; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.rng);

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const Matrix x = gather_rows(train.features, rows);
      const Matrix preds = forward(state.params, x);
      if (!preds.allFinite()) {
        throw TrainingDiverged("non-finite prediction at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_index));
      }
      Matrix grad(preds.rows(), preds.cols());
      const double inv_batch = 1.0 / static_cast<double>(rows.size());

      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto i = rows[k];
        const auto labels = train.labels.row(i);
        const auto pseudo = ours ? state.pseudo.row_values(i) : std::span<const double>(no_pseudo);
        auto inst = method_loss(cfg.method, row_span(preds, static_cast<Eigen::Index>(k)), labels,
                                pseudo, epoch, cfg.loss_cfg);
        if (!std::isfinite(inst.breakdown.total)) {
          throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
        }
        if (ours && cfg.loss_cfg.penalty_mode == PenaltyMode::ObservedOnly &&
            std::none_of(labels.begin(), labels.end(), is_known)) {
          ++rec.warnings;
        }
        rec.loss.observed_term += inst.breakdown.observed_term;
        rec.loss.pseudo_term += inst.breakdown.pseudo_term;
        rec.loss.penalty_term += inst.breakdown.penalty_term;
        for (std::size_t c = 0; c < inst.grad.size(); ++c) {
          grad(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
              inst.grad[c] * inv_batch;
        }
      }
      const ModelParams g = backward(state.params, x, grad);
      try {
        state.params = sgd_step(state.params, g, cfg.learning_rate);
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_index));
      }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    rec.loss.observed_term *= inv_n;
    rec.loss.pseudo_term *= inv_n;
    rec.loss.penalty_term *= inv_n;
    rec.loss.attention_weight = ours ? attention_weight(epoch, cfg.epochs, cfg.loss_cfg.shift) : 0.0;
    rec.loss.total = rec.loss.observed_term + rec.loss.attention_weight * rec.loss.pseudo_term +
                     rec.loss.penalty_term;

    // End-of-epoch snapshot with this epoch's final parameters.
    const Matrix train_preds = forward(state.params, train.features);
    if (ours) {
      state.pseudo.push_predictions(train_preds);
      state.pseudo.update();
      rec.pseudo_mean = state.pseudo.mean_value();
    }
    rec.train_map = mean_ap_observed(train_preds, train.labels);
    rec.val_map = mean_ap(forward(state.params, val.features), val.labels).map;
    state.history.rows.push_back(rec);
    state.epochs_done = epoch;
  }
}

TrainResult train(const Dataset& train_set, const Dataset& val, const TrainConfig& cfg) {
  TrainState s = start_training(train_set, cfg);
  run_epochs(s, train_set, val, cfg, cfg.epochs);
  return TrainResult{s.params, s.history, std::move(s)};
}

SearchResult hparam_search(const Dataset& train_set, const Dataset& val, const TrainConfig& base,
                           const HparamGrid& grid) {
  if (grid.learning_rates.empty() || grid.batch_sizes.empty()) {
    throw ValidationError("hyperparameter grid is empty");
  }
  std::vector<double> lrs = grid.learning_rates;
  std::vector<std::size_t> bss = grid.batch_sizes;
  std::sort(lrs.begin(), lrs.end());
  std::sort(bss.begin(), bss.end());

  std::optional<SearchResult> best;
  std::vector<GridRun> runs;
  for (double lr : lrs) {
    for (std::size_t bs : bss) {
      TrainConfig cfg = base;
      cfg.learning_rate = lr;
      cfg.batch_size = bs;
      GridRun run{lr, bs, -std::numeric_limits<double>::infinity(), {}};
      try {
        TrainResult r = train(train_set, val, cfg);
        run.val_map = r.history.rows.back().val_map;
        // Strict '>' keeps the earlier (smaller lr, then smaller batch) on ties.
        if (!best || run.val_map > best->best_val_map) {
          best = SearchResult{cfg, run.val_map, {}, std::move(r)};
        }
      } catch (const TrainingDiverged& e) {
        run.failure = e.what();
      }
      runs.push_back(run);
    }
  }
  if (!best) throw TrainingDiverged("every grid point diverged");
  best->runs = std::move(runs);
  return std::move(*best);
}

}  // namespace plr
