#include "plr/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "plr/errors.hpp"

namespace plr {
namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int kind_rank(const SweepAttack& a) {
  if (a.clean) return 0;
  switch (a.kind) {
    case AttackKind::SinglePositive: return 1;
    case AttackKind::Targeted: return 2;
    case AttackKind::Random: return 3;
  }
  return 4;
}

double attack_q(const SweepAttack& a) {
  return a.clean || a.kind == AttackKind::SinglePositive ? 0.0 : a.q;
}

bool attack_less(const SweepAttack& a, const SweepAttack& b) {
  return std::make_tuple(kind_rank(a), attack_q(a)) < std::make_tuple(kind_rank(b), attack_q(b));
}

bool same_attack(const SweepAttack& a, const SweepAttack& b) {
  return !attack_less(a, b) && !attack_less(b, a);
}

Json attack_json(const SweepAttack& a) {
  return Json{{"kind", a.kind_name()}, {"q", attack_q(a)}};
}

SweepAttack attack_from_json(const Json& j) {
  SweepAttack a;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "clean") {
    a.clean = true;
  } else {
    a.kind = parse_attack_kind(kind);
    a.q = j.value("q", 0.0);
  }
  return a;
}

Json cell_to_json(const CellResult& c) {
  return Json{{"attack", attack_json(c.attack)},
              {"method", std::string(to_string(c.method))},
              {"seed", c.seed},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"val_map", c.val_map},
              {"test_map", c.test_map}};
}

CellResult cell_from_json(const Json& j) {
  CellResult c;
  c.attack = attack_from_json(j.at("attack"));
  c.method = parse_method(j.at("method").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.val_map = j.at("val_map").get<double>();
  c.test_map = j.at("test_map").get<double>();
  return c;
}

bool cell_less(const CellResult& a, const CellResult& b) {
  if (attack_less(a.attack, b.attack)) return true;
  if (attack_less(b.attack, a.attack)) return false;
  return std::make_tuple(to_string(a.method), a.seed) < std::make_tuple(to_string(b.method), b.seed);
}

std::string dataset_fingerprint(const fs::path& dir) {
  std::string blob;
  for (const char* stem : {"train", "val", "test"}) {
    const fs::path mp = manifest_path(dir, stem);
    const auto m = read_manifest(mp);
    blob += read_text_file(mp);
    blob += read_text_file(dir / m.features_path);
    blob += read_text_file(dir / m.labels_path);
  }
  return hex64(fnv1a64(blob));
}

}  // namespace

std::string SweepAttack::kind_name() const {
  return clean ? std::string("clean") : std::string(to_string(kind));
}

std::string SweepAttack::label() const {
  if (clean) return "clean";
  switch (kind) {
    case AttackKind::SinglePositive: return "Ts";
    case AttackKind::Targeted: return "T" + format_double(q);
    case AttackKind::Random: return "R" + format_double(q);
  }
  return "?";
}

void SweepConfig::validate() const {
  if (attacks.empty() || methods.empty() || seeds.empty()) {
    throw ValidationError("sweep: attacks, methods and seeds must be non-empty");
  }
  if (grid.learning_rates.empty() || grid.batch_sizes.empty()) {
    throw ValidationError("sweep: hyperparameter grid must be non-empty");
  }
  if (out_dir.empty()) throw ValidationError("sweep: output directory not set");
  if (jobs < 1) throw ValidationError("sweep: jobs must be >= 1");
  for (const auto& a : attacks) {
    if (!a.clean && !(a.q >= 0.0 && a.q <= 1.0)) throw ValidationError("sweep: q must lie in [0,1]");
  }
  base.validate();
}

SweepConfig sweep_config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("sweep config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    static const std::vector<std::string> allowed = {"dataset", "attacks", "methods", "seeds",
                                                     "grid",    "train",   "out",     "jobs"};
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ValidationError("sweep config: unknown key '" + k + "'");
    }
  }
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_absolute() ? q : base_dir / q;
  };
  try {
    SweepConfig c;
    c.dataset_dir = resolve(j.at("dataset").get<std::string>());
    for (const auto& a : j.at("attacks")) {
      const auto kind = a.at("kind").get<std::string>();
      if (kind == "clean" || kind == "single_positive" || kind == "single") {
        c.attacks.push_back(attack_from_json(Json{{"kind", kind == "single" ? "single_positive" : kind}}));
        continue;
      }
      if (!a.contains("q")) throw ValidationError("sweep: attack '" + kind + "' needs q");
      const auto& qs = a.at("q");
      std::vector<double> values = qs.is_array() ? qs.get<std::vector<double>>()
                                                 : std::vector<double>{qs.get<double>()};
      for (double q : values) {
        SweepAttack sa;
        sa.kind = parse_attack_kind(kind);
        sa.q = q;
        c.attacks.push_back(sa);
      }
    }
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.grid = hparam_grid_from_json(j.at("grid"));
    if (j.contains("train")) c.base = train_config_from_json(j.at("train"));
    if (j.contains("out")) c.out_dir = resolve(j.at("out").get<std::string>());
    c.jobs = j.value("jobs", std::size_t{1});
    return c;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed sweep config: ") + e.what());
  }
}

std::vector<AggregateRow> aggregate_cells(const std::vector<CellResult>& cells_in) {
  std::vector<CellResult> cells = cells_in;
  std::stable_sort(cells.begin(), cells.end(), cell_less);
  std::vector<AggregateRow> rows;
  std::size_t i = 0;
  while (i < cells.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < cells.size() && same_attack(cells[j].attack, cells[i].attack) &&
           cells[j].method == cells[i].method) {
      sum += cells[j].test_map;
      ++j;
    }
    const auto n = j - i;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = i; k < j; ++k) ss += (cells[k].test_map - mean) * (cells[k].test_map - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    rows.push_back({cells[i].attack, cells[i].method, n, mean, sd});
    i = j;
  }
  return rows;
}

void write_sweep_report(const std::vector<CellResult>& cells_in, const fs::path& out_dir) {
  std::vector<CellResult> cells = cells_in;
  std::stable_sort(cells.begin(), cells.end(), cell_less);

  std::ostringstream obs;
  obs << "attack,q,method,seed,learning_rate,batch_size,val_map,test_map\n";
  for (const auto& c : cells) {
    obs << c.attack.kind_name() << ',' << format_double(attack_q(c.attack)) << ','
        << to_string(c.method) << ',' << c.seed << ',' << format_double(c.learning_rate) << ','
        << c.batch_size << ',' << format_double(c.val_map) << ',' << format_double(c.test_map)
        << '\n';
  }
  write_text_file(out_dir / "observations.csv", obs.str());

  const auto rows = aggregate_cells(cells);
  std::ostringstream agg;
  agg << "attack,q,method,n_seeds,mean_map,std_map\n";
  std::vector<std::string> methods;
  std::vector<std::string> columns;
  std::vector<TableCell> table;
  std::vector<MapObservation> observations;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : rows) {
    const std::string method(to_string(r.method));
    agg << r.attack.kind_name() << ',' << format_double(attack_q(r.attack)) << ',' << method << ','
        << r.n_seeds << ',' << format_double(r.mean_map) << ',' << format_double(r.std_map) << '\n';
    add_unique(columns, r.attack.label());
    table.push_back({method, r.attack.label(),
                     format_fixed(100.0 * r.mean_map, 1) + " +- " + format_fixed(100.0 * r.std_map, 1)});
    observations.push_back({r.attack.kind_name(), attack_q(r.attack), method, r.mean_map});
  }
  for (const auto& r : rows) add_unique(methods, std::string(to_string(r.method)));
  std::sort(methods.begin(), methods.end());
  write_text_file(out_dir / "aggregate.csv", agg.str());
  write_text_file(out_dir / "table.txt", aligned_table(methods, columns, table));

  std::map<std::string, bool> has_clean;
  for (const auto& m : methods) has_clean[m] = false;
  for (const auto& o : observations) {
    if (o.attack == "clean") has_clean[o.method] = true;
  }
  const bool all_clean = std::all_of(has_clean.begin(), has_clean.end(),
                                     [](const auto& kv) { return kv.second; });
  if (all_clean && !methods.empty()) {
    const auto rep = robustness_report(observations);
    write_text_file(out_dir / "robustness.csv", rep.to_csv());
    write_text_file(out_dir / "robustness.txt", rep.to_text());
  }
}

std::vector<CellResult> load_cells(const fs::path& out_dir) {
  std::vector<CellResult> cells;
  const fs::path dir = out_dir / "cells";
  if (!fs::exists(dir)) return cells;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      cells.push_back(cell_from_json(read_json_file(f).at("result")));
    } catch (const Json::exception& e) {
      throw ValidationError("malformed cell file '" + f.string() + "': " + e.what());
    }
  }
  std::stable_sort(cells.begin(), cells.end(), cell_less);
  return cells;
}

SweepOutcome run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const Dataset train_set = load_dataset(manifest_path(cfg.dataset_dir, "train"));
  const Dataset val_set = load_dataset(manifest_path(cfg.dataset_dir, "val"));
  const Dataset test_set = load_dataset(manifest_path(cfg.dataset_dir, "test"));
  if (train_set.split == "test") throw ValidationError("refusing to attack a split tagged test");
  const std::string fingerprint = dataset_fingerprint(cfg.dataset_dir);

  struct Job {
    SweepAttack attack;
    Method method;
    std::uint64_t seed;
    Json key;
    fs::path file;
  };
  std::vector<Job> jobs;
  for (const auto& a : cfg.attacks) {
    for (auto m : cfg.methods) {
      for (auto s : cfg.seeds) {
        TrainConfig base = cfg.base;
        base.method = m;
        base.seed = s;
        Json key{{"dataset", fingerprint},
                 {"attack", attack_json(a)},
                 {"method", std::string(to_string(m))},
                 {"seed", s},
                 {"grid", to_json(cfg.grid)},
                 {"train", to_json(base)}};
        const fs::path file = cfg.out_dir / "cells" / (hex64(fnv1a64(key.dump())) + ".json");
        jobs.push_back({a, m, s, std::move(key), file});
      }
    }
  }

  SweepOutcome out;
  out.cells.resize(jobs.size());
  std::vector<bool> done(jobs.size(), false);
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!fs::exists(jobs[k].file)) continue;
    const Json stored = read_json_file(jobs[k].file);
    if (stored.value("key", Json()) != jobs[k].key) {
      throw ValidationError("cell file '" + jobs[k].file.string() +
                            "' belongs to a different configuration");
    }
    out.cells[k] = cell_from_json(stored.at("result"));
    done[k] = true;
    ++out.reused;
  }

  auto run_job = [&](std::size_t k) {
    const Job& job = jobs[k];
    Dataset attacked = train_set;
    if (!job.attack.clean) {
      attacked = train_set.with_labels(
          apply_attack({job.attack.kind, job.attack.q, job.seed}, train_set.labels).labels);
    }
    TrainConfig base = cfg.base;
    base.method = job.method;
    base.seed = job.seed;
    const SearchResult sr = hparam_search(attacked, val_set, base, cfg.grid);
    CellResult c;
    c.attack = job.attack;
    c.method = job.method;
    c.seed = job.seed;
    c.learning_rate = sr.best.learning_rate;
    c.batch_size = sr.best.batch_size;
    c.val_map = sr.best_val_map;
    c.test_map = mean_ap(forward(sr.best_run.params, test_set.features), test_set.labels).map;
    write_text_file(job.file, Json{{"key", job.key}, {"result", cell_to_json(c)}}.dump(2) + "\n");
    out.cells[k] = c;
  };

  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!done[k]) pending.push_back(k);
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= pending.size()) return;
      try {
        run_job(pending[idx]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.jobs, std::max<std::size_t>(pending.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  out.executed = pending.size();

  write_sweep_report(out.cells, cfg.out_dir);
  return out;
}

}  // namespace plr
