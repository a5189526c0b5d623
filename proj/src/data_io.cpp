#include "plr/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include "plr/errors.hpp"

namespace plr {
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + p.string() + "'");
  return ss.str();
}

void write_text_file(const fs::path& p, const std::string& content) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, p, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + p.string() + "': " + ec.message());
}

Json read_json_file(const fs::path& p) {
  const std::string text = read_text_file(p);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError("malformed JSON in '" + p.string() + "': " + e.what());
  }
}

namespace {

// Splits text into lines, dropping one trailing newline and any '\r'.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) {
      tokens.push_back(line.substr(start));
      break;
    }
    tokens.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

std::string where(const std::string& origin, std::size_t line, std::size_t col) {
  return origin + ":" + std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

std::string format_labels(const TriStateLabelMatrix& m) {
  std::string out;
  out.reserve(m.n_instances() * m.n_classes() * 2);
  for (std::size_t i = 0; i < m.n_instances(); ++i) {
    auto row = m.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      switch (row[c]) {
        case LabelState::Positive: out += '1'; break;
        case LabelState::Negative: out += '0'; break;
        case LabelState::Unknown: out += '?'; break;
      }
    }
    out += '\n';
  }
  return out;
}

TriStateLabelMatrix parse_labels(const std::string& text, std::size_t n_instances,
                                 std::size_t n_classes, const std::string& origin) {
  const auto lines = split_lines(text);
  if (lines.size() != n_instances) {
    throw ValidationError(origin + ": expected " + std::to_string(n_instances) +
                          " label rows, found " + std::to_string(lines.size()));
  }
  std::vector<LabelState> cells;
  cells.reserve(n_instances * n_classes);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_tokens(lines[i]);
    if (tokens.size() != n_classes) {
      throw ValidationError(where(origin, i + 1, 1) + ": dimension mismatch, expected " +
                            std::to_string(n_classes) + " columns, found " +
                            std::to_string(tokens.size()));
    }
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      const auto tok = tokens[c];
      if (tok == "1") {
        cells.push_back(LabelState::Positive);
      } else if (tok == "0") {
        cells.push_back(LabelState::Negative);
      } else if (tok == "?") {
        cells.push_back(LabelState::Unknown);
      } else {
        throw ValidationError(where(origin, i + 1, c + 1) + ": unknown label token '" +
                              std::string(tok) + "'");
      }
    }
  }
  return TriStateLabelMatrix(n_instances, n_classes, std::move(cells));
}

std::string format_features(const Matrix& f) {
  std::string out;
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(f(r, c));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_features(const std::string& text, std::size_t n_instances, std::size_t feature_dim,
                      const std::string& origin) {
  const auto lines = split_lines(text);
  if (lines.size() != n_instances) {
    throw ValidationError(origin + ": expected " + std::to_string(n_instances) +
                          " feature rows, found " + std::to_string(lines.size()));
  }
  Matrix f(static_cast<Eigen::Index>(n_instances), static_cast<Eigen::Index>(feature_dim));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_tokens(lines[i]);
    if (tokens.size() != feature_dim) {
      throw ValidationError(where(origin, i + 1, 1) + ": dimension mismatch, expected " +
                            std::to_string(feature_dim) + " columns, found " +
                            std::to_string(tokens.size()));
    }
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      double v = 0.0;
      const auto tok = tokens[c];
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw ValidationError(where(origin, i + 1, c + 1) + ": malformed number '" +
                              std::string(tok) + "'");
      }
      if (!std::isfinite(v)) {
        throw ValidationError(where(origin, i + 1, c + 1) + ": non-finite feature value");
      }
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return f;
}

Json DatasetManifest::to_json() const {
  return Json{{"name", name},
              {"split", split},
              {"n_instances", n_instances},
              {"n_classes", n_classes},
              {"feature_dim", feature_dim},
              {"features_path", features_path},
              {"labels_path", labels_path},
              {"provenance", provenance}};
}

DatasetManifest DatasetManifest::from_json(const Json& j) {
  try {
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.split = j.value("split", std::string("all"));
    m.n_instances = j.at("n_instances").get<std::size_t>();
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.features_path = j.at("features_path").get<std::string>();
    m.labels_path = j.at("labels_path").get<std::string>();
    m.provenance = j.value("provenance", Json::object());
    return m;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed dataset manifest: ") + e.what());
  }
}

fs::path manifest_path(const fs::path& dir, const std::string& stem) {
  return dir / (stem + ".manifest.json");
}

DatasetManifest save_dataset(const Dataset& d, const fs::path& dir, const std::string& stem_in,
                             const Json& provenance) {
  const std::string stem = stem_in.empty() ? d.split : stem_in;
  DatasetManifest m;
  m.name = d.name;
  m.split = d.split;
  m.n_instances = d.n_instances();
  m.n_classes = d.n_classes();
  m.feature_dim = d.feature_dim();
  m.features_path = stem + ".features.csv";
  m.labels_path = stem + ".labels.csv";
  m.provenance = provenance;
  write_text_file(dir / m.features_path, format_features(d.features));
  write_text_file(dir / m.labels_path, format_labels(d.labels));
  write_text_file(manifest_path(dir, stem), m.to_json().dump(2) + "\n");
  return m;
}

DatasetManifest read_manifest(const fs::path& p) {
  return DatasetManifest::from_json(read_json_file(p));
}

Dataset load_dataset(const fs::path& p) {
  const DatasetManifest m = read_manifest(p);
  if (m.n_instances == 0 || m.n_classes == 0 || m.feature_dim == 0) {
    throw ValidationError(p.string() + ": manifest dimensions must be positive");
  }
  const fs::path base = p.parent_path();
  auto resolve = [&](const std::string& rel) {
    fs::path q(rel);
    return q.is_absolute() ? q : base / q;
  };
  const fs::path fpath = resolve(m.features_path);
  const fs::path lpath = resolve(m.labels_path);
  Matrix f = parse_features(read_text_file(fpath), m.n_instances, m.feature_dim, fpath.string());
  TriStateLabelMatrix l = parse_labels(read_text_file(lpath), m.n_instances, m.n_classes,
                                       lpath.string());
  return Dataset(std::move(f), std::move(l), m.name, m.split);
}

namespace {

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ValidationError(std::string(what) + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read_key(const Json& j, const char* key, T& out, const char* what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string(what) + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const LossConfig& c) {
  Json j{{"alpha", c.weights.alpha},
         {"beta", c.weights.beta},
         {"gamma", c.weights.gamma},
         {"n_t", c.n_t},
         {"clamp_eps", c.clamp_eps},
         {"penalty_mode", std::string(to_string(c.penalty_mode))},
         {"penalty_eps", c.penalty_eps},
         {"ls_eps", c.ls_eps},
         {"shift", std::string(to_string(c.shift))}};
  j["wan_weight"] = c.wan_weight ? Json(*c.wan_weight) : Json(nullptr);
  return j;
}

LossConfig loss_config_from_json(const Json& j) {
  constexpr const char* what = "loss_cfg";
  reject_unknown_keys(j,
                      {"alpha", "beta", "gamma", "n_t", "clamp_eps", "penalty_mode",
                       "penalty_eps", "wan_weight", "ls_eps", "shift"},
                      what);
  LossConfig c;
  read_key(j, "alpha", c.weights.alpha, what);
  read_key(j, "beta", c.weights.beta, what);
  read_key(j, "gamma", c.weights.gamma, what);
  read_key(j, "n_t", c.n_t, what);
  read_key(j, "clamp_eps", c.clamp_eps, what);
  read_key(j, "penalty_eps", c.penalty_eps, what);
  read_key(j, "ls_eps", c.ls_eps, what);
  std::string s;
  if (j.contains("penalty_mode")) {
    read_key(j, "penalty_mode", s, what);
    c.penalty_mode = parse_penalty_mode(s);
  }
  if (j.contains("shift")) {
    read_key(j, "shift", s, what);
    c.shift = parse_attention_shift(s);
  }
  if (j.contains("wan_weight") && !j.at("wan_weight").is_null()) {
    double w = 0.0;
    read_key(j, "wan_weight", w, what);
    c.wan_weight = w;
  }
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"method", std::string(to_string(c.method))},
              {"loss_cfg", to_json(c.loss_cfg)},
              {"seed", c.seed},
              {"arch", to_string(c.arch)}};
}

TrainConfig train_config_from_json(const Json& j) {
  constexpr const char* what = "train config";
  reject_unknown_keys(
      j, {"epochs", "learning_rate", "batch_size", "method", "loss_cfg", "seed", "arch", "grid"},
      what);
  TrainConfig c;
  read_key(j, "epochs", c.epochs, what);
  read_key(j, "learning_rate", c.learning_rate, what);
  read_key(j, "batch_size", c.batch_size, what);
  read_key(j, "seed", c.seed, what);
  std::string s;
  if (j.contains("method")) {
    read_key(j, "method", s, what);
    c.method = parse_method(s);
  }
  if (j.contains("arch")) {
    read_key(j, "arch", s, what);
    c.arch = parse_arch(s);
  }
  if (j.contains("loss_cfg")) c.loss_cfg = loss_config_from_json(j.at("loss_cfg"));
  c.validate();
  return c;
}

Json to_json(const AttackSpec& a) {
  return Json{{"kind", std::string(to_string(a.kind))}, {"q", a.q}, {"seed", a.seed}};
}

AttackSpec attack_spec_from_json(const Json& j) {
  constexpr const char* what = "attack spec";
  reject_unknown_keys(j, {"kind", "q", "seed"}, what);
  AttackSpec a;
  std::string s;
  read_key(j, "kind", s, what);
  a.kind = parse_attack_kind(s);
  if (a.kind != AttackKind::SinglePositive && !j.contains("q")) {
    throw ValidationError("attack spec: q is required for " + std::string(to_string(a.kind)));
  }
  read_key(j, "q", a.q, what);
  read_key(j, "seed", a.seed, what);
  if (!(a.q >= 0.0 && a.q <= 1.0)) throw ValidationError("attack spec: q must lie in [0,1]");
  return a;
}

Json to_json(const HparamGrid& g) {
  return Json{{"learning_rate", g.learning_rates}, {"batch_size", g.batch_sizes}};
}

HparamGrid hparam_grid_from_json(const Json& j) {
  constexpr const char* what = "grid";
  reject_unknown_keys(j, {"learning_rate", "batch_size"}, what);
  HparamGrid g;
  read_key(j, "learning_rate", g.learning_rates, what);
  read_key(j, "batch_size", g.batch_sizes, what);
  if (g.learning_rates.empty() || g.batch_sizes.empty()) {
    throw ValidationError("grid: learning_rate and batch_size lists must be non-empty");
  }
  return g;
}

}  // namespace plr
