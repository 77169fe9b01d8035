#pragma once

// Reference implementations used only by tests. These are written directly
// from the definitions, independently of the library code paths, so the two
// can be checked against each other.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rudi/dataset.hpp"
#include "rudi/operators.hpp"

namespace oracle {

inline double agg_percentile(std::vector<double> xs, double k) {
  std::sort(xs.begin(), xs.end());
  const double pos = k / 100.0 * double(xs.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::size_t(std::ceil(pos));
  const double frac = pos - double(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

inline double aggregate(rudi::OpType type, int percentile_rank,
                        const std::vector<double>& xs) {
  using rudi::OpType;
  if (xs.empty()) return 0.0;
  switch (type) {
    case OpType::Count:
      return double(xs.size());
    case OpType::Sum: {
      double s = 0.0;
      for (double x : xs) s += x;
      return s;
    }
    case OpType::Mean: {
      double s = 0.0;
      for (double x : xs) s += x;
      return s / double(xs.size());
    }
    case OpType::Max:
      return *std::max_element(xs.begin(), xs.end());
    case OpType::Min:
      return *std::min_element(xs.begin(), xs.end());
    case OpType::Std: {
      double s = 0.0;
      for (double x : xs) s += x;
      const double mean = s / double(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      return std::sqrt(var / double(xs.size()));
    }
    case OpType::Ptp:
      return *std::max_element(xs.begin(), xs.end()) -
             *std::min_element(xs.begin(), xs.end());
    case OpType::First:
      return xs.front();
    case OpType::Percentile:
      return agg_percentile(xs, double(percentile_rank));
    default:
      return 0.0;
  }
}

// One materialized working row: the full event plus the current target value.
struct WorkRow {
  std::vector<rudi::CellValue> cells;
  double target = 0.0;
};

// Evaluates one dimension of a chain: the target value of a row is either the
// numerical column or the 0/1 indicator of one vocab entry.
inline double evaluate_dim(const rudi::StatisticChain& chain,
                           const rudi::Schema& schema,
                           const rudi::EventSequence& seq, std::size_t dim) {
  using rudi::OpType;
  const rudi::Operator& select = chain.ops.front();
  const rudi::Column& target_col = schema.column(select.column);
  const bool categorical = target_col.kind == rudi::ColumnKind::Categorical;

  std::vector<WorkRow> rows;
  for (const auto& cells : seq.rows) {
    WorkRow row;
    row.cells = cells;
    row.target = categorical
                     ? (cells[select.column].category == dim ? 1.0 : 0.0)
                     : cells[select.column].number;
    rows.push_back(std::move(row));
  }

  std::size_t group_col = rudi::kNoIndex;
  std::size_t pos = 1;
  for (; pos + 1 < chain.ops.size(); ++pos) {
    const rudi::Operator& op = chain.ops[pos];
    std::vector<WorkRow> next;
    switch (op.type) {
      case OpType::FilterBy:
        for (auto& row : rows)
          if (row.cells[op.column].category != op.category)
            next.push_back(std::move(row));
        rows = std::move(next);
        break;
      case OpType::RetainBy:
        for (auto& row : rows)
          if (row.cells[op.column].category == op.category)
            next.push_back(std::move(row));
        rows = std::move(next);
        break;
      case OpType::SortBy:
        std::stable_sort(rows.begin(), rows.end(),
                         [&](const WorkRow& a, const WorkRow& b) {
                           const double x = a.cells[op.column].number;
                           const double y = b.cells[op.column].number;
                           return op.ascending ? x < y : x > y;
                         });
        break;
      case OpType::Top5:
        if (rows.size() > 5) rows.resize(5);
        break;
      case OpType::Abs:
        for (auto& row : rows) row.target = std::fabs(row.target);
        break;
      case OpType::GroupBy:
        group_col = op.column;
        break;
      default:
        break;
    }
  }

  const rudi::Operator& agg = chain.ops.back();
  std::vector<double> xs;
  for (const auto& row : rows) {
    if (group_col != rudi::kNoIndex && row.cells[group_col].category != dim)
      continue;
    xs.push_back(row.target);
  }
  return aggregate(agg.type, agg.percentile, xs);
}

inline std::vector<double> evaluate(const rudi::StatisticChain& chain,
                                    const rudi::Schema& schema,
                                    const rudi::EventSequence& seq) {
  const rudi::Operator& select = chain.ops.front();
  const rudi::Column& target_col = schema.column(select.column);
  std::size_t dims = 1;
  if (target_col.kind == rudi::ColumnKind::Categorical)
    dims = target_col.vocab.size();
  for (const rudi::Operator& op : chain.ops)
    if (op.type == rudi::OpType::GroupBy)
      dims = schema.column(op.column).vocab.size();
  std::vector<double> out;
  for (std::size_t d = 0; d < dims; ++d)
    out.push_back(evaluate_dim(chain, schema, seq, d));
  return out;
}

// Exhaustively enumerates every operator sequence of length <= max_depth over
// the schema (no grammar shortcuts) and keeps those passing `accept`.
inline void enumerate_chains(
    const rudi::Schema& schema, std::size_t max_depth,
    const std::function<void(const rudi::StatisticChain&)>& visit) {
  const std::vector<rudi::Operator> ops = rudi::all_operators(schema);
  std::vector<rudi::Operator> stack;
  std::function<void()> rec = [&]() {
    if (!stack.empty()) visit(rudi::StatisticChain{stack});
    if (stack.size() == max_depth) return;
    for (const rudi::Operator& op : ops) {
      stack.push_back(op);
      rec();
      stack.pop_back();
    }
  };
  rec();
}

}  // namespace oracle
