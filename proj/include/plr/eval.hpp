#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plr/core_data.hpp"

namespace plr {

// Non-interpolated average precision: scores are ranked descending (ties by
// ascending index) and precision@k is averaged over the ranks k that hold a
// positive. Requires at least one positive.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> truths);

struct SkippedClass {
  std::size_t class_index;
  std::string reason;
};

struct EvalReport {
  std::vector<std::optional<double>> per_class_ap;  // nullopt for skipped classes
  double map = 0.0;
  std::vector<SkippedClass> skipped_classes;
};

// Macro mAP against a full (clean) truth matrix. Classes without positives
// are skipped; throws if every class is skipped.
EvalReport mean_ap(const Matrix& scores, const TriStateLabelMatrix& truth);

// Same, but per class only the instances whose label is observed are ranked.
// Used for the training-set metric on partial labels. Returns NaN when no
// class can be scored.
double mean_ap_observed(const Matrix& scores, const TriStateLabelMatrix& labels);

struct MapObservation {
  std::string attack;  // "clean" marks the un-attacked baseline of a method
  double q = 0.0;
  std::string method;
  double map = 0.0;
};

struct RobustnessRow {
  std::string attack;
  double q = 0.0;
  std::string method;
  double clean_map = 0.0;
  double attacked_map = 0.0;
  double degradation = 0.0;  // clean_map - attacked_map
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;  // sorted by (method, attack, q)

  std::string to_csv() const;
  std::string to_text() const;
};

// Joins every attacked observation with its method's clean observation.
// Throws if a method has no clean observation.
RobustnessReport robustness_report(std::span<const MapObservation> observations);

// Fixed-width table: one row per method, one column per attack setting.
struct TableCell {
  std::string row;
  std::string column;
  std::string text;
};
std::string aligned_table(std::span<const std::string> rows, std::span<const std::string> columns,
                          std::span<const TableCell> cells, const std::string& corner = "method");

}  // namespace plr
