#include "plr/checkpoint.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "plr/errors.hpp"

namespace plr {
namespace {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Matrix m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw ValidationError("matrix row count mismatch");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = data.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ValidationError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

// NaN is not representable in JSON; it travels as null.
Json number_or_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
double number_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json params_to_json(const ModelParams& p) {
  return Json{{"arch", to_string(p.arch)},
              {"feature_dim", p.feature_dim},
              {"n_classes", p.n_classes},
              {"w1", matrix_to_json(p.w1)},
              {"b1", vector_to_json(p.b1)},
              {"w2", matrix_to_json(p.w2)},
              {"b2", vector_to_json(p.b2)}};
}

ModelParams params_from_json(const Json& j) {
  ModelParams p;
  p.arch = parse_arch(j.at("arch").get<std::string>());
  p.feature_dim = j.at("feature_dim").get<std::size_t>();
  p.n_classes = j.at("n_classes").get<std::size_t>();
  p.w1 = matrix_from_json(j.at("w1"));
  p.b1 = vector_from_json(j.at("b1"));
  p.w2 = matrix_from_json(j.at("w2"));
  p.b2 = vector_from_json(j.at("b2"));
  const bool linear = p.arch.kind == Arch::Kind::Linear;
  const auto d = static_cast<Eigen::Index>(p.feature_dim);
  const auto c = static_cast<Eigen::Index>(p.n_classes);
  const auto h = linear ? c : static_cast<Eigen::Index>(p.arch.hidden_dim);
  bool ok = p.w1.rows() == d && p.w1.cols() == h && p.b1.size() == h;
  ok = ok && (linear ? (p.w2.size() == 0 && p.b2.size() == 0)
                     : (p.w2.rows() == h && p.w2.cols() == c && p.b2.size() == c));
  if (!ok) throw ValidationError("checkpoint parameter shapes are inconsistent with the architecture");
  if (!p.all_finite()) throw ValidationError("checkpoint contains non-finite parameters");
  return p;
}

Json pseudo_to_json(const PseudoState& s) {
  Json cells = Json::array();
  Json stacks = Json::array();
  for (std::size_t i = 0; i < s.n_instances(); ++i) {
    for (auto c : s.row_classes(i)) {
      cells.push_back(Json::array({i, c}));
      const auto& st = s.stack(i, c);
      Json e = Json::array();
      for (std::size_t k = 0; k < st.size(); ++k) e.push_back(st[k]);
      stacks.push_back(std::move(e));
    }
  }
  const auto& w = s.weights();
  return Json{{"n_instances", s.n_instances()},
              {"n_classes", s.n_classes()},
              {"weights", Json::array({w.alpha, w.beta, w.gamma})},
              {"cells", std::move(cells)},
              {"values", std::vector<double>(s.values().begin(), s.values().end())},
              {"stacks", std::move(stacks)}};
}

PseudoState pseudo_from_json(const Json& j) {
  const auto n = j.at("n_instances").get<std::size_t>();
  const auto c = j.at("n_classes").get<std::size_t>();
  if (n == 0 || c == 0) return PseudoState{};
  TriStateLabelMatrix mask(n, c, LabelState::Negative);
  for (const auto& cell : j.at("cells")) {
    mask.set(cell.at(0).get<std::size_t>(), cell.at(1).get<std::size_t>(), LabelState::Unknown);
  }
  const auto& wj = j.at("weights");
  PseudoWeights w{wj.at(0).get<double>(), wj.at(1).get<double>(), wj.at(2).get<double>()};
  std::vector<HistoryStack> stacks;
  for (const auto& e : j.at("stacks")) {
    if (e.size() > HistoryStack::kCapacity) throw ValidationError("history stack too deep");
    HistoryStack st;
    // Stored newest first; push oldest first to rebuild the order.
    for (std::size_t k = e.size(); k-- > 0;) st.push(e.at(k).get<double>());
    stacks.push_back(st);
  }
  return PseudoState::restore(mask, w, j.at("values").get<std::vector<double>>(), std::move(stacks));
}

Json history_to_json(const TrainHistory& h) {
  Json rows = Json::array();
  for (const auto& r : h.rows) {
    rows.push_back(Json{{"epoch", r.epoch},
                        {"observed_term", r.loss.observed_term},
                        {"pseudo_term", r.loss.pseudo_term},
                        {"attention_weight", r.loss.attention_weight},
                        {"penalty_term", r.loss.penalty_term},
                        {"total", r.loss.total},
                        {"train_map", number_or_null(r.train_map)},
                        {"val_map", number_or_null(r.val_map)},
                        {"pseudo_mean", r.pseudo_mean ? Json(*r.pseudo_mean) : Json(nullptr)},
                        {"warnings", r.warnings}});
  }
  return rows;
}

TrainHistory history_from_json(const Json& j) {
  TrainHistory h;
  for (const auto& r : j) {
    EpochRecord e;
    e.epoch = r.at("epoch").get<int>();
    e.loss.observed_term = r.at("observed_term").get<double>();
    e.loss.pseudo_term = r.at("pseudo_term").get<double>();
    e.loss.attention_weight = r.at("attention_weight").get<double>();
    e.loss.penalty_term = r.at("penalty_term").get<double>();
    e.loss.total = r.at("total").get<double>();
    e.train_map = number_from(r.at("train_map"));
    e.val_map = number_from(r.at("val_map"));
    if (!r.at("pseudo_mean").is_null()) e.pseudo_mean = r.at("pseudo_mean").get<double>();
    e.warnings = r.at("warnings").get<std::size_t>();
    h.rows.push_back(e);
  }
  return h;
}

}  // namespace

Json checkpoint_to_json(const Checkpoint& c) {
  std::ostringstream rng;
  rng << c.state.rng;
  return Json{{"format", "plr-checkpoint-1"},
              {"config", to_json(c.config)},
              {"params", params_to_json(c.state.params)},
              {"pseudo", pseudo_to_json(c.state.pseudo)},
              {"rng", rng.str()},
              {"epochs_done", c.state.epochs_done},
              {"history", history_to_json(c.state.history)}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "plr-checkpoint-1") {
      throw ValidationError("unsupported checkpoint format");
    }
    Checkpoint c;
    c.config = train_config_from_json(j.at("config"));
    c.state.params = params_from_json(j.at("params"));
    c.state.pseudo = pseudo_from_json(j.at("pseudo"));
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> c.state.rng;
    if (!rng) throw ValidationError("malformed RNG state in checkpoint");
    c.state.epochs_done = j.at("epochs_done").get<int>();
    c.state.history = history_from_json(j.at("history"));
    return c;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c) {
  write_text_file(p, checkpoint_to_json(c).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& p) {
  return checkpoint_from_json(read_json_file(p));
}

std::string training_log_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,observed_term,pseudo_term,attention_weight,penalty_term,total,train_mAP,val_mAP,"
        "pseudo_mean\n";
  for (const auto& r : h.rows) {
    os << r.epoch << ',' << format_double(r.loss.observed_term) << ','
       << format_double(r.loss.pseudo_term) << ',' << format_double(r.loss.attention_weight)
       << ',' << format_double(r.loss.penalty_term) << ',' << format_double(r.loss.total) << ','
       << format_double(r.train_map) << ',' << format_double(r.val_map) << ','
       << (r.pseudo_mean ? format_double(*r.pseudo_mean) : std::string()) << '\n';
  }
  return os.str();
}

}  // namespace plr
