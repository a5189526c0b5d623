#include "plr/cli.hpp"

#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "plr/attacks.hpp"
#include "plr/checkpoint.hpp"
#include "plr/data_io.hpp"
#include "plr/errors.hpp"
#include "plr/eval.hpp"
#include "plr/sweep.hpp"
#include "plr/synthgen.hpp"
#include "plr/trainer.hpp"

namespace plr {
namespace fs = std::filesystem;
namespace {

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

int cmd_gen_synth(const GlobalFlags& g, SynthSpec spec, double train_frac, double val_frac,
                  const std::string& name, std::ostream& out) {
  require(!g.out.empty(), "--out is required");
  require(spec.n_instances >= 3, "--n must be >= 3");
  require(spec.n_classes >= 1, "--classes must be >= 1");
  require(spec.feature_dim >= 1, "--dim must be >= 1");
  require(spec.positive_rate > 0.0 && spec.positive_rate < 1.0, "--rho must lie in (0, 1)");
  require(spec.noise_sigma >= 0.0 && std::isfinite(spec.noise_sigma), "--sigma must be >= 0");
  require(train_frac > 0.0 && train_frac < 1.0, "--train-frac must lie in (0, 1)");
  require(val_frac > 0.0 && val_frac < 1.0 && train_frac + val_frac < 1.0,
          "--val-frac must lie in (0, 1) with --train-frac + --val-frac < 1");
  spec.seed = g.seed.value_or(0);

  Dataset all = gen_synthetic(spec);
  all.name = name;
  const fs::path dir(g.out);
  const Json prov{{"generator", "synthetic"},
                  {"n_instances", spec.n_instances},
                  {"n_classes", spec.n_classes},
                  {"feature_dim", spec.feature_dim},
                  {"positive_rate", spec.positive_rate},
                  {"noise_sigma", spec.noise_sigma},
                  {"seed", spec.seed}};
  save_dataset(all, dir, "all", prov);
  const auto parts = split_dataset(all, train_frac, val_frac, spec.seed);
  Json split_prov = prov;
  split_prov["train_frac"] = train_frac;
  split_prov["val_frac"] = val_frac;
  for (const Dataset* d : {&parts.train, &parts.val, &parts.test}) {
    save_dataset(*d, dir, d->split, split_prov);
  }
  for (const char* stem : {"all", "train", "val", "test"}) {
    out << manifest_path(dir, stem).string() << '\n';
  }
  return kExitOk;
}

int cmd_attack(const GlobalFlags& g, const std::string& manifest, std::optional<std::string> kind,
               std::optional<double> q, std::ostream& out, std::ostream& err) {
  require(!g.out.empty(), "--out is required");
  AttackSpec spec;
  bool have_q = false;
  if (!g.config.empty()) {
    spec = attack_spec_from_json(read_json_file(g.config));
    have_q = true;
  }
  if (kind) spec.kind = parse_attack_kind(*kind);
  if (q) {
    spec.q = *q;
    have_q = true;
  }
  if (g.seed) spec.seed = *g.seed;
  require(g.config.empty() ? kind.has_value() : true, "--kind is required");
  require(spec.kind == AttackKind::SinglePositive || have_q,
          "--q is required for kind " + std::string(to_string(spec.kind)));
  require(spec.q >= 0.0 && spec.q <= 1.0, "--q must lie in [0, 1]");

  const Dataset d = load_dataset(manifest);
  require(d.split != "test", "refusing to attack '" + manifest +
                                 "': split is tagged test (evaluation labels stay clean)");
  const auto before = count_labels(d.labels);
  const AttackResult res = apply_attack(spec, d.labels);
  const auto after = count_labels(res.labels);

  Json prov{{"source", fs::absolute(manifest).lexically_normal().string()},
            {"attack", to_json(spec)},
            {"counts_before", {{"t", before.t}, {"t_p", before.t_p}, {"t_n", before.t_n}, {"t_u", before.t_u}}},
            {"counts_after", {{"t", after.t}, {"t_p", after.t_p}, {"t_n", after.t_n}, {"t_u", after.t_u}}},
            {"warnings", res.warnings.size()}};
  if (spec.kind == AttackKind::Targeted) {
    prov["q_hat"] = effective_removal_rate(before, spec.q);
  }
  const std::string stem = d.split.empty() ? "attacked" : d.split;
  const fs::path dir(g.out);
  save_dataset(d.with_labels(res.labels), dir, stem, prov);
  std::string log;
  for (const auto& w : res.warnings) log += w + "\n";
  write_text_file(dir / (stem + ".attack.log"), log);

  out << manifest_path(dir, stem).string() << '\n';
  out << "removed " << (after.t_u - before.t_u) << " of " << before.t << " labels";
  if (prov.contains("q_hat")) out << " (q_hat " << format_double(prov["q_hat"].get<double>()) << ")";
  out << '\n';
  if (!res.warnings.empty()) err << "warning: " << res.warnings.size() << " instance(s) had no positive label; see attack log\n";
  return kExitOk;
}

int cmd_train(const GlobalFlags& g, const std::string& manifest, const std::string& val_manifest,
              std::ostream& out, std::ostream& err) {
  require(!g.out.empty(), "--out is required");
  require(!g.config.empty(), "--config is required");
  const Json cj = read_json_file(g.config);
  TrainConfig cfg = train_config_from_json(cj);
  if (g.seed) cfg.seed = *g.seed;
  const Dataset train_set = load_dataset(manifest);
  const Dataset val_set = load_dataset(val_manifest);
  require(val_set.labels.is_full(), "validation labels must be full");

  const fs::path dir(g.out);
  TrainResult result;
  if (cj.contains("grid")) {
    const HparamGrid grid = hparam_grid_from_json(cj.at("grid"));
    SearchResult sr = hparam_search(train_set, val_set, cfg, grid);
    std::string csv = "learning_rate,batch_size,val_map,failure\n";
    for (const auto& r : sr.runs) {
      csv += format_double(r.learning_rate) + "," + std::to_string(r.batch_size) + "," +
             format_double(r.val_map) + "," + r.failure + "\n";
    }
    write_text_file(dir / "search.csv", csv);
    cfg = sr.best;
    result = std::move(sr.best_run);
    out << "selected learning_rate " << format_double(cfg.learning_rate) << ", batch_size "
        << cfg.batch_size << " (val mAP " << format_fixed(100.0 * sr.best_val_map, 2) << ")\n";
  } else {
    result = train(train_set, val_set, cfg);
  }
  save_checkpoint(dir / "checkpoint.json", Checkpoint{cfg, result.state});
  write_text_file(dir / "train_log.csv", training_log_csv(result.history));
  std::size_t warnings = 0;
  for (const auto& r : result.history.rows) warnings += r.warnings;
  if (warnings > 0) {
    err << "warning: " << warnings
        << " instance-epoch(s) had no observed label under observed_only penalty (penalty = 1)\n";
  }
  const auto& last = result.history.rows.back();
  out << "trained " << last.epoch << " epochs, final val mAP " << format_fixed(100.0 * last.val_map, 2)
      << "\n" << (dir / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(const GlobalFlags& g, const std::string& checkpoint, const std::string& manifest,
             std::ostream& out, std::ostream& err) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint + "' not found");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset test = load_dataset(manifest);
  const EvalReport rep = mean_ap(forward(ck.state.params, test.features), test.labels);

  std::vector<std::string> rows;
  std::vector<std::string> cols = {"AP"};
  std::vector<TableCell> cells;
  std::string csv = "class,ap\n";
  for (std::size_t c = 0; c < rep.per_class_ap.size(); ++c) {
    const std::string name = "class " + std::to_string(c);
    rows.push_back(name);
    const auto& ap = rep.per_class_ap[c];
    cells.push_back({name, "AP", ap ? format_fixed(100.0 * *ap, 2) : std::string("skipped")});
    csv += std::to_string(c) + "," + (ap ? format_double(*ap) : std::string()) + "\n";
  }
  rows.push_back("mAP");
  cells.push_back({"mAP", "AP", format_fixed(100.0 * rep.map, 2)});
  csv += "mAP," + format_double(rep.map) + "\n";
  out << aligned_table(rows, cols, cells, "class");
  for (const auto& s : rep.skipped_classes) {
    err << "warning: class " << s.class_index << " skipped (" << s.reason << ")\n";
  }
  if (!g.out.empty()) write_text_file(fs::path(g.out) / "eval.csv", csv);
  return kExitOk;
}

int cmd_sweep(const GlobalFlags& g, std::optional<std::size_t> jobs, std::ostream& out) {
  require(!g.config.empty(), "--config is required");
  const fs::path cfg_path(g.config);
  SweepConfig cfg = sweep_config_from_json(read_json_file(cfg_path), cfg_path.parent_path());
  if (!g.out.empty()) cfg.out_dir = g.out;
  if (jobs) cfg.jobs = *jobs;
  const SweepOutcome res = run_sweep(cfg);
  out << "cells: " << res.executed << " executed, " << res.reused << " reused\n";
  out << read_text_file(cfg.out_dir / "table.txt");
  return kExitOk;
}

int cmd_report(const GlobalFlags& g, std::ostream& out) {
  require(!g.out.empty(), "--out (sweep output directory) is required");
  const auto cells = load_cells(g.out);
  require(!cells.empty(), "no sweep cells under '" + g.out + "'");
  write_sweep_report(cells, g.out);
  out << read_text_file(fs::path(g.out) / "table.txt");
  const fs::path rob = fs::path(g.out) / "robustness.txt";
  if (fs::exists(rob)) out << '\n' << read_text_file(rob);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label-removal attacks and pseudo-label training on multi-label data", "plr"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "Config file (JSON)");

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic multi-label dataset");
  SynthSpec spec;
  double train_frac = 0.6, val_frac = 0.2;
  std::string name = "synthetic";
  gen->add_option("--n", spec.n_instances, "Instances")->capture_default_str();
  gen->add_option("--classes", spec.n_classes, "Classes")->capture_default_str();
  gen->add_option("--dim", spec.feature_dim, "Feature dimension")->capture_default_str();
  gen->add_option("--rho", spec.positive_rate, "Positive label rate")->capture_default_str();
  gen->add_option("--sigma", spec.noise_sigma, "Feature noise")->capture_default_str();
  gen->add_option("--train-frac", train_frac, "Training fraction")->capture_default_str();
  gen->add_option("--val-frac", val_frac, "Validation fraction")->capture_default_str();
  gen->add_option("--name", name, "Dataset name")->capture_default_str();

  auto* atk = app.add_subcommand("attack", "Remove labels from a training split");
  std::string atk_manifest;
  std::optional<std::string> kind;
  std::optional<double> q;
  atk->add_option("--manifest", atk_manifest, "Dataset manifest")->required();
  atk->add_option("--kind", kind, "targeted | random | single_positive");
  atk->add_option("--q", q, "Removal fraction");

  auto* trn = app.add_subcommand("train", "Train a classifier");
  std::string trn_manifest, val_manifest;
  trn->add_option("--manifest", trn_manifest, "Training manifest")->required();
  trn->add_option("--val", val_manifest, "Validation manifest")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ck_path, ev_manifest;
  ev->add_option("--checkpoint", ck_path, "Checkpoint file")->required();
  ev->add_option("--manifest", ev_manifest, "Test manifest")->required();

  auto* sw = app.add_subcommand("sweep", "Run a factorial attack x method x seed sweep");
  std::optional<std::size_t> jobs;
  sw->add_option("--jobs", jobs, "Worker threads");

  auto* rep = app.add_subcommand("report", "Rebuild sweep tables from stored cells");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_synth(g, spec, train_frac, val_frac, name, out);
    if (*atk) return cmd_attack(g, atk_manifest, kind, q, out, err);
    if (*trn) return cmd_train(g, trn_manifest, val_manifest, out, err);
    if (*ev) return cmd_eval(g, ck_path, ev_manifest, out, err);
    if (*sw) return cmd_sweep(g, jobs, out);
    if (*rep) return cmd_report(g, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace plr
