#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rudi/dataset.hpp"

namespace rudi {

inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

enum class OpType {
  Select,
  Mean,
  Max,
  Min,
  Sum,
  Std,
  Ptp,
  Count,
  First,
  Percentile,
  GroupBy,
  FilterBy,
  RetainBy,
  SortBy,
  Top5,
  Abs,
};

// Percentile ranks the search space offers, per the operator set definition.
inline constexpr int kPercentileRanks[] = {5, 10, 25, 50, 75, 90, 95};

struct Operator {
  OpType type = OpType::Select;
  std::size_t column = kNoIndex;    // Select/GroupBy/FilterBy/RetainBy/SortBy
  std::size_t category = kNoIndex;  // FilterBy/RetainBy
  int percentile = 0;               // Percentile
  bool ascending = true;            // SortBy

  friend bool operator==(const Operator&, const Operator&) = default;
};

bool is_aggregation(OpType type);

// An ordered operator composition S = T_d o ... o T_1, stored first-to-last
// (ops[0] = T_1). Validity is a property of the whole chain; partially built
// chains flow through the same type.
struct StatisticChain {
  std::vector<Operator> ops;

  std::size_t depth() const { return ops.size(); }
  friend bool operator==(const StatisticChain&, const StatisticChain&) = default;
};

struct ChainParseError : std::runtime_error {
  ChainParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"),
        position(pos) {}
  std::size_t position;
};

// Canonical operator enumeration for `schema`: Selects in column order, then
// aggregations, GroupBy, FilterBy, RetainBy, SortBy, Top5, Abs. All
// tie-breaking and expansion ordering in the search derives from this order.
std::vector<Operator> all_operators(const Schema& schema);

// Declarative validity check (grammar + well-kindedness + depth bound).
bool is_valid(const StatisticChain& chain, const Schema& schema,
              std::size_t max_depth);

// True if `prefix` extended by `op` is still completable to a valid chain
// within max_depth (exclusions not considered).
bool extension_ok(const StatisticChain& prefix, const Operator& op,
                  const Schema& schema, std::size_t max_depth);

// Operators T such that some valid completion of T o prefix within max_depth
// exists outside `excluded` (keys are format_chain strings). Canonical order.
std::vector<Operator> valid_next_operators(const StatisticChain& prefix,
                                           const Schema& schema,
                                           std::size_t max_depth,
                                           const std::set<std::string>& excluded);

// 1 for a numerical target without GroupBy, otherwise the vocab size of the
// categorical target (one-hot) or of the GroupBy column.
std::size_t output_dim(const StatisticChain& chain, const Schema& schema);

// Pure evaluation of a valid chain on one sequence; returns output_dim values.
std::vector<double> evaluate(const StatisticChain& chain, const Schema& schema,
                             const EventSequence& seq);

// Row i is evaluate(chain, sequences[indices[i]]).
Eigen::MatrixXd evaluate_column(const StatisticChain& chain, const Dataset& d,
                                const std::vector<std::size_t>& indices);

// DSL: outermost operator first, "o"-joined ("∘" accepted as alias), e.g.
// "Sum∘FilterBy[cardtype=debit]∘Select[money]". parse(format(c)) == c.
std::string format_chain(const StatisticChain& chain, const Schema& schema);
StatisticChain parse_chain(const std::string& text, const Schema& schema);

// Per-output-dimension labels: the chain DSL with "col=entry" substituted in
// the Select (one-hot target) or GroupBy bracket; used as literal names.
std::vector<std::string> column_labels(const StatisticChain& chain,
                                       const Schema& schema);

// A chain plus the output dimension a label singles out (kNoIndex for scalar
// chains). Inverse of column_labels entries.
struct LabeledChain {
  StatisticChain chain;
  std::size_t dim = kNoIndex;

  friend bool operator==(const LabeledChain&, const LabeledChain&) = default;
};
LabeledChain parse_label(const std::string& text, const Schema& schema);

}  // namespace rudi
