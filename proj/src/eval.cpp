#include "plr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "plr/data_io.hpp"
#include "plr/errors.hpp"

namespace plr {

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> truths) {
  if (scores.size() != truths.size()) throw ValidationError("score and truth sizes differ");
  const auto n_pos = std::count_if(truths.begin(), truths.end(), [](auto t) { return t != 0; });
  if (n_pos == 0) throw ValidationError("average precision needs at least one positive");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truths[order[rank]] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return sum / static_cast<double>(n_pos);
}

EvalReport mean_ap(const Matrix& scores, const TriStateLabelMatrix& truth) {
  if (static_cast<std::size_t>(scores.rows()) != truth.n_instances() ||
      static_cast<std::size_t>(scores.cols()) != truth.n_classes()) {
    throw ValidationError("score and truth matrix shapes differ");
  }
  if (!truth.is_full()) throw ValidationError("mean_ap needs a fully labelled truth matrix");

  EvalReport rep;
  rep.per_class_ap.resize(truth.n_classes());
  std::vector<double> col(truth.n_instances());
  std::vector<std::uint8_t> y(truth.n_instances());
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t c = 0; c < truth.n_classes(); ++c) {
    bool any = false;
    for (std::size_t i = 0; i < truth.n_instances(); ++i) {
      col[i] = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      y[i] = truth.at(i, c) == LabelState::Positive ? 1 : 0;
      any = any || y[i] != 0;
    }
    if (!any) {
      rep.skipped_classes.push_back({c, "no positive instances"});
      continue;
    }
    const double ap = average_precision(col, y);
    rep.per_class_ap[c] = ap;
    sum += ap;
    ++scored;
  }
  if (scored == 0) throw ValidationError("mean_ap: every class has zero positives");
  rep.map = sum / static_cast<double>(scored);
  return rep;
}

double mean_ap_observed(const Matrix& scores, const TriStateLabelMatrix& labels) {
  if (static_cast<std::size_t>(scores.rows()) != labels.n_instances() ||
      static_cast<std::size_t>(scores.cols()) != labels.n_classes()) {
    throw ValidationError("score and label matrix shapes differ");
  }
  double sum = 0.0;
  std::size_t scored = 0;
  std::vector<double> col;
  std::vector<std::uint8_t> y;
  for (std::size_t c = 0; c < labels.n_classes(); ++c) {
    col.clear();
    y.clear();
    for (std::size_t i = 0; i < labels.n_instances(); ++i) {
      const auto s = labels.at(i, c);
      if (!is_known(s)) continue;
      col.push_back(scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
      y.push_back(s == LabelState::Positive ? 1 : 0);
    }
    if (std::find(y.begin(), y.end(), 1) == y.end()) continue;
    sum += average_precision(col, y);
    ++scored;
  }
  if (scored == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(scored);
}

RobustnessReport robustness_report(std::span<const MapObservation> observations) {
  std::map<std::string, double> clean;
  for (const auto& o : observations) {
    if (o.attack == "clean") clean[o.method] = o.map;
  }
  RobustnessReport rep;
  for (const auto& o : observations) {
    if (o.attack == "clean") continue;
    auto it = clean.find(o.method);
    if (it == clean.end()) {
      throw ValidationError("no clean baseline for method '" + o.method + "'");
    }
    rep.rows.push_back({o.attack, o.q, o.method, it->second, o.map, it->second - o.map});
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.attack, a.q) < std::tie(b.method, b.attack, b.q);
  });
  return rep;
}

std::string RobustnessReport::to_csv() const {
  std::ostringstream os;
  os << "attack,q,method,clean_map,attacked_map,degradation\n";
  for (const auto& r : rows) {
    os << r.attack << ',' << format_double(r.q) << ',' << r.method << ','
       << format_double(r.clean_map) << ',' << format_double(r.attacked_map) << ','
       << format_double(r.degradation) << '\n';
  }
  return os.str();
}

std::string RobustnessReport::to_text() const {
  std::vector<std::string> methods;
  std::vector<std::string> columns;
  std::vector<TableCell> cells;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : rows) {
    add_unique(methods, r.method);
    std::string col = r.attack + "@" + format_fixed(r.q, 2);
    add_unique(columns, col);
    // Shown as change from clean: a drop of 8.6 points prints as -8.6.
    const double delta = -100.0 * r.degradation;
    cells.push_back({r.method, col,
                     format_fixed(100.0 * r.attacked_map, 1) + " (" + (delta >= 0.0 ? "+" : "") +
                         format_fixed(delta, 1) + ")"});
  }
  return aligned_table(methods, columns, cells);
}

std::string aligned_table(std::span<const std::string> rows, std::span<const std::string> columns,
                          std::span<const TableCell> cells, const std::string& corner) {
  std::map<std::pair<std::string, std::string>, std::string> lookup;
  for (const auto& c : cells) lookup[{c.row, c.column}] = c.text;

  std::size_t first_w = corner.size();
  for (const auto& r : rows) first_w = std::max(first_w, r.size());
  std::vector<std::size_t> widths;
  for (const auto& col : columns) {
    std::size_t w = col.size();
    for (const auto& r : rows) {
      auto it = lookup.find({r, col});
      if (it != lookup.end()) w = std::max(w, it->second.size());
    }
    widths.push_back(w);
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  std::ostringstream os;
  os << pad(corner, first_w);
  for (std::size_t j = 0; j < columns.size(); ++j) os << " | " << pad(columns[j], widths[j]);
  os << '\n' << std::string(first_w, '-');
  for (auto w : widths) os << "-+-" << std::string(w, '-');
  os << '\n';
  for (const auto& r : rows) {
    os << pad(r, first_w);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      auto it = lookup.find({r, columns[j]});
      os << " | " << pad(it == lookup.end() ? "-" : it->second, widths[j]);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace plr
