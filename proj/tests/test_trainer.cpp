#include <doctest.h>

#include "plr/attacks.hpp"
#include "plr/errors.hpp"
#include "plr/eval.hpp"
#include "plr/synthgen.hpp"
#include "plr/trainer.hpp"
#include "test_util.hpp"

using namespace plr;
using namespace plr::testing;

namespace {

DatasetSplit small_benchmark(std::uint64_t seed, std::size_t n = 200, double sigma = 1.0) {
  SynthSpec s;
  s.n_instances = n;
  s.n_classes = 4;
  s.feature_dim = 8;
  s.noise_sigma = sigma;
  s.seed = seed;
  return split_dataset(gen_synthetic(s), 0.6, 0.2, seed);
}

void check_same_history(const TrainHistory& a, const TrainHistory& b, bool compare_attention) {
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].loss.observed_term == b.rows[k].loss.observed_term);
    CHECK(a.rows[k].loss.pseudo_term == b.rows[k].loss.pseudo_term);
    CHECK(a.rows[k].loss.penalty_term == b.rows[k].loss.penalty_term);
    CHECK(a.rows[k].loss.total == b.rows[k].loss.total);
    if (compare_attention) CHECK(a.rows[k].loss.attention_weight == b.rows[k].loss.attention_weight);
    CHECK(a.rows[k].train_map == b.rows[k].train_map);
    CHECK(a.rows[k].val_map == b.rows[k].val_map);
  }
}

}  // namespace

TEST_CASE("separable smoke test reaches high train mAP") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec s;
    s.n_instances = 50;
    s.n_classes = 2;
    s.feature_dim = 4;
    s.positive_rate = 0.5;
    s.noise_sigma = 0.0;
    s.seed = seed;
    const Dataset d = gen_synthetic(s);
    TrainConfig cfg;
    cfg.method = Method::Bce;
    cfg.epochs = 10;
    cfg.seed = seed;
    const auto sr = hparam_search(d, d, cfg, HparamGrid{{1e-1, 1.0}, {8}});
    CHECK(sr.best_run.history.rows.back().train_map >= 0.95);
  }
}

TEST_CASE("training is deterministic") {
  const auto sp = small_benchmark(3);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 8;
  const auto train_set = sp.train.with_labels(targeted_attack(sp.train.labels, 0.4, 1));
  const auto a = train(train_set, sp.val, cfg);
  const auto b = train(train_set, sp.val, cfg);
  CHECK(a.params == b.params);
  CHECK(a.state.pseudo == b.state.pseudo);
  check_same_history(a.history, b.history, true);
}

TEST_CASE("Ours on full labels reproduces the BCE run") {
  const auto sp = small_benchmark(5);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 16;
  cfg.loss_cfg.penalty_mode = PenaltyMode::Off;
  cfg.method = Method::Ours;
  const auto ours = train(sp.train, sp.val, cfg);
  cfg.method = Method::Bce;
  const auto plain = train(sp.train, sp.val, cfg);
  CHECK(ours.params == plain.params);
  CHECK(ours.state.pseudo.empty());
  check_same_history(ours.history, plain.history, false);
}

TEST_CASE("pseudo-labels first move at epoch 3") {
  const auto sp = small_benchmark(7);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 16;
  const auto train_set = sp.train.with_labels(targeted_attack(sp.train.labels, 0.4, 2));
  const auto r = train(train_set, sp.val, cfg);
  REQUIRE(r.history.rows.size() == 10);
  CHECK(r.history.rows[0].pseudo_mean.value() == 1.0);
  CHECK(r.history.rows[1].pseudo_mean.value() == 1.0);
  CHECK(r.history.rows[2].pseudo_mean.value() != 1.0);
}

TEST_CASE("frozen model drives pseudo-labels to its predictions") {
  const auto sp = small_benchmark(9);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.learning_rate = 0.0;
  const auto train_set = sp.train.with_labels(random_attack(sp.train.labels, 0.5, 3));
  const auto r = train(train_set, sp.val, cfg);
  const Matrix pred = forward(r.params, train_set.features);
  const auto& ps = r.state.pseudo;
  REQUIRE(ps.size() > 0);
  for (std::size_t i = 0; i < ps.n_instances(); ++i) {
    const auto cls = ps.row_classes(i);
    const auto vals = ps.row_values(i);
    for (std::size_t k = 0; k < cls.size(); ++k)
      CHECK(vals[k] == pred(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cls[k])));
  }
}

TEST_CASE("epoch records follow the contract") {
  const auto sp = small_benchmark(11);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.1;
  const auto train_set = sp.train.with_labels(random_attack(sp.train.labels, 0.3, 4));
  const auto r = train(train_set, sp.val, cfg);
  for (std::size_t k = 0; k < r.history.rows.size(); ++k) {
    const auto& e = r.history.rows[k];
    CHECK(e.epoch == static_cast<int>(k) + 1);
    CHECK(std::abs(e.loss.total - (e.loss.observed_term + e.loss.attention_weight * e.loss.pseudo_term +
                                   e.loss.penalty_term)) < 1e-12);
  }
  CHECK(r.history.rows.back().val_map == mean_ap(forward(r.params, sp.val.features), sp.val.labels).map);
  CHECK(r.history.rows.back().loss.attention_weight == 1.0);

  cfg.method = Method::An;
  const auto an = train(train_set, sp.val, cfg);
  CHECK(!an.history.rows.back().pseudo_mean.has_value());
  CHECK(an.history.rows.back().loss.attention_weight == 0.0);
}

TEST_CASE("hyperparameter search") {
  const auto sp = small_benchmark(13);
  TrainConfig cfg;
  cfg.epochs = 3;

  const auto full = hparam_search(sp.train, sp.val, cfg, HparamGrid{{1e-3, 1e-4}, {8, 16}});
  CHECK(full.runs.size() == 4);
  double best = -1.0;
  for (const auto& r : full.runs) best = std::max(best, r.val_map);
  CHECK(full.best_val_map == best);
  CHECK(full.best_run.history.rows.back().val_map == best);

  const auto one = hparam_search(sp.train, sp.val, cfg, HparamGrid{{0.05}, {4}});
  CHECK(one.best.learning_rate == 0.05);
  CHECK(one.best.batch_size == 4);

  const auto forced = hparam_search(sp.train, sp.val, cfg, HparamGrid{{0.0, 0.5}, {8}});
  CHECK(forced.best.learning_rate == 0.5);
  CHECK(forced.runs[0].val_map < forced.runs[1].val_map);

  CHECK_THROWS_AS(hparam_search(sp.train, sp.val, cfg, HparamGrid{{}, {8}}), ValidationError);
}

TEST_CASE("divergence aborts with the epoch and batch") {
  // Clamped outputs keep the loss finite for finite parameters, so corrupt
  // the state directly to exercise the abort path.
  const auto sp = small_benchmark(15);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.method = Method::An;
  TrainState st = start_training(sp.train, cfg);
  st.params.b1(0) = std::nan("");
  std::string msg;
  try {
    run_epochs(st, sp.train, sp.val, cfg, 1);
  } catch (const TrainingDiverged& e) {
    msg = e.what();
  }
  CHECK(msg.find("epoch 1") != std::string::npos);
  CHECK(msg.find("batch 0") != std::string::npos);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
