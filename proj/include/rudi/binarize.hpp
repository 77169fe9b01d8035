#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rudi {

// Per-literal provenance: the source column of the concatenated statistic
// value matrix, its human-readable label, and the threshold (if any).
struct LiteralDescriptor {
  std::size_t source_column = 0;
  std::string label;      // chain DSL, dimension-qualified for vector stats
  bool passthrough = false;  // source column was already binary on train
  double threshold = 0.0;
  std::string render;     // "label > threshold", the rule-output form
};

// Fitted on the training split only and persisted with the model artifact.
struct ThresholdModel {
  struct ColumnRule {
    bool passthrough = false;
    std::vector<double> thresholds;  // 11 percentile cuts (0,10,...,90,100)
  };
  std::vector<ColumnRule> columns;
  std::vector<std::string> labels;
};

struct LiteralTable {
  Eigen::MatrixXd bits;  // N x P', entries in {0, 1}
  std::vector<LiteralDescriptor> descriptors;

  std::size_t num_literals() const { return descriptors.size(); }
};

// One rule per column: passthrough when all train values are in {0,1},
// otherwise the 11 decile thresholds (plus min and max).
ThresholdModel fit_thresholds(const Eigen::MatrixXd& train_values,
                              const std::vector<std::string>& labels);

// The descriptor list a model induces, in literal-column order; transform()
// produces exactly these.
std::vector<LiteralDescriptor> literal_descriptors(const ThresholdModel& model);

// Strict ">" comparisons against the train-fitted thresholds; applicable to
// any split.
LiteralTable transform(const Eigen::MatrixXd& values,
                       const ThresholdModel& model);

// Logs a warning for every literal column whose bit pattern duplicates an
// earlier one; call on the training-split table.
void warn_duplicate_literals(const LiteralTable& table);

// [z, 1-z, 1, 0]: negations plus the constant shortcut bits.
Eigen::VectorXd augment(const Eigen::VectorXd& literal_row);

// Splits a rendered literal ("label > threshold") back into its parts.
// Inverse of LiteralDescriptor::render.
std::pair<std::string, double> parse_literal_render(const std::string& render);

// Shortest round-trip decimal rendering, shared by all artifact writers.
std::string format_value(double v);

}  // namespace rudi
