#include "rudi/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rudi/numerics.hpp"

namespace rudi {

bool is_aggregation(OpType type) {
  switch (type) {
    case OpType::Mean:
    case OpType::Max:
    case OpType::Min:
    case OpType::Sum:
    case OpType::Std:
    case OpType::Ptp:
    case OpType::Count:
    case OpType::First:
    case OpType::Percentile:
      return true;
    default:
      return false;
  }
}

std::vector<Operator> all_operators(const Schema& schema) {
  std::vector<Operator> ops;
  for (std::size_t c = 0; c < schema.size(); ++c)
    ops.push_back({OpType::Select, c});
  for (OpType agg : {OpType::Mean, OpType::Max, OpType::Min, OpType::Sum,
                     OpType::Std, OpType::Ptp, OpType::Count, OpType::First})
    ops.push_back({agg});
  for (int k : kPercentileRanks) {
    Operator op{OpType::Percentile};
    op.percentile = k;
    ops.push_back(op);
  }
  for (std::size_t c : schema.categorical_columns())
    ops.push_back({OpType::GroupBy, c});
  for (std::size_t c : schema.categorical_columns())
    for (std::size_t f = 0; f < schema.column(c).vocab.size(); ++f)
      ops.push_back({OpType::FilterBy, c, f});
  for (std::size_t c : schema.categorical_columns())
    for (std::size_t f = 0; f < schema.column(c).vocab.size(); ++f)
      ops.push_back({OpType::RetainBy, c, f});
  for (std::size_t c : schema.numerical_columns()) {
    Operator asc{OpType::SortBy, c};
    asc.ascending = true;
    ops.push_back(asc);
    Operator desc{OpType::SortBy, c};
    desc.ascending = false;
    ops.push_back(desc);
  }
  ops.push_back({OpType::Top5});
  ops.push_back({OpType::Abs});
  return ops;
}

namespace {

bool column_ref_ok(const Operator& op, const Schema& schema) {
  switch (op.type) {
    case OpType::Select:
      return op.column < schema.size();
    case OpType::GroupBy:
      return op.column < schema.size() &&
             schema.column(op.column).kind == ColumnKind::Categorical;
    case OpType::FilterBy:
    case OpType::RetainBy:
      return op.column < schema.size() &&
             schema.column(op.column).kind == ColumnKind::Categorical &&
             op.category < schema.column(op.column).vocab.size();
    case OpType::SortBy:
      return op.column < schema.size() &&
             schema.column(op.column).kind == ColumnKind::Numerical;
    case OpType::Percentile:
      return std::find(std::begin(kPercentileRanks),
                       std::end(kPercentileRanks),
                       op.percentile) != std::end(kPercentileRanks);
    default:
      return true;
  }
}

bool duplicate_filter(const std::vector<Operator>& ops, std::size_t upto,
                      const Operator& candidate) {
  if (candidate.type != OpType::FilterBy) return false;
  for (std::size_t i = 0; i < upto; ++i)
    if (ops[i].type == OpType::FilterBy && ops[i].column == candidate.column &&
        ops[i].category == candidate.category)
      return true;
  return false;
}

}  // namespace

bool is_valid(const StatisticChain& chain, const Schema& schema,
              std::size_t max_depth) {
  const auto& ops = chain.ops;
  const std::size_t d = ops.size();
  if (d < 2 || d > max_depth) return false;
  for (const Operator& op : ops)
    if (!column_ref_ok(op, schema)) return false;
  if (ops[0].type != OpType::Select) return false;
  if (!is_aggregation(ops.back().type)) return false;
  const bool numerical_target =
      schema.column(ops[0].column).kind == ColumnKind::Numerical;
  for (std::size_t i = 1; i + 1 < d; ++i) {
    switch (ops[i].type) {
      case OpType::FilterBy:
        if (duplicate_filter(ops, i, ops[i])) return false;
        break;
      case OpType::RetainBy:
      case OpType::SortBy:
      case OpType::Top5:
        break;
      case OpType::Abs:
        if (!numerical_target) return false;
        break;
      case OpType::GroupBy:
        // a GroupBy must be immediately followed by the aggregation
        if (i != d - 2 || !numerical_target) return false;
        break;
      default:
        return false;  // Select or aggregation in the middle
    }
  }
  return true;
}

bool extension_ok(const StatisticChain& prefix, const Operator& op,
                  const Schema& schema, std::size_t max_depth) {
  if (!column_ref_ok(op, schema)) return false;
  const auto& ops = prefix.ops;
  if (ops.empty()) return op.type == OpType::Select;
  if (ops.size() >= max_depth) return false;
  if (is_aggregation(ops.back().type)) return false;  // already complete
  if (op.type == OpType::Select) return false;
  if (is_aggregation(op.type)) return true;
  // non-aggregation: after a GroupBy only the aggregation may follow, and
  // there must be room left for the aggregation itself
  if (ops.back().type == OpType::GroupBy) return false;
  if (ops.size() + 1 >= max_depth) return false;
  const bool numerical_target =
      schema.column(ops[0].column).kind == ColumnKind::Numerical;
  switch (op.type) {
    case OpType::FilterBy:
      return !duplicate_filter(ops, ops.size(), op);
    case OpType::RetainBy:
    case OpType::SortBy:
    case OpType::Top5:
      return true;
    case OpType::Abs:
    case OpType::GroupBy:
      return numerical_target;
    default:
      return false;
  }
}

namespace {

// Depth-first search for any valid completion of `chain` not in `excluded`.
bool completion_exists(StatisticChain& chain, const Schema& schema,
                       std::size_t max_depth,
                       const std::set<std::string>& excluded,
                       const std::vector<Operator>& alphabet) {
  if (!chain.ops.empty() && is_aggregation(chain.ops.back().type))
    return !excluded.count(format_chain(chain, schema));
  for (const Operator& op : alphabet) {
    if (!extension_ok(chain, op, schema, max_depth)) continue;
    chain.ops.push_back(op);
    const bool found =
        completion_exists(chain, schema, max_depth, excluded, alphabet);
    chain.ops.pop_back();
    if (found) return true;
  }
  return false;
}

}  // namespace

std::vector<Operator> valid_next_operators(const StatisticChain& prefix,
                                           const Schema& schema,
                                           std::size_t max_depth,
                                           const std::set<std::string>& excluded) {
  const std::vector<Operator> alphabet = all_operators(schema);
  std::vector<Operator> result;
  StatisticChain scratch = prefix;
  for (const Operator& op : alphabet) {
    if (!extension_ok(prefix, op, schema, max_depth)) continue;
    scratch.ops.push_back(op);
    if (excluded.empty() ||
        completion_exists(scratch, schema, max_depth, excluded, alphabet))
      result.push_back(op);
    scratch.ops.pop_back();
  }
  return result;
}

std::size_t output_dim(const StatisticChain& chain, const Schema& schema) {
  const Column& target = schema.column(chain.ops.at(0).column);
  if (target.kind == ColumnKind::Categorical) return target.vocab.size();
  for (const Operator& op : chain.ops)
    if (op.type == OpType::GroupBy)
      return schema.column(op.column).vocab.size();
  return 1;
}

namespace {

double aggregate(const std::vector<double>& values, const Operator& agg) {
  if (values.empty()) {
    // empty-table defaults keep the reward arithmetic total
    return 0.0;
  }
  switch (agg.type) {
    case OpType::Mean:
      return std::accumulate(values.begin(), values.end(), 0.0) /
             double(values.size());
    case OpType::Max:
      return *std::max_element(values.begin(), values.end());
    case OpType::Min:
      return *std::min_element(values.begin(), values.end());
    case OpType::Sum:
      return std::accumulate(values.begin(), values.end(), 0.0);
    case OpType::Std: {
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                          double(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / double(values.size()));  // population divisor
    }
    case OpType::Ptp:
      return *std::max_element(values.begin(), values.end()) -
             *std::min_element(values.begin(), values.end());
    case OpType::Count:
      return double(values.size());
    case OpType::First:
      return values.front();
    case OpType::Percentile:
      return percentile(values, double(agg.percentile));
    default:
      throw std::logic_error("aggregate: not an aggregation operator");
  }
}

}  // namespace

std::vector<double> evaluate(const StatisticChain& chain, const Schema& schema,
                             const EventSequence& seq) {
  const auto& ops = chain.ops;
  const std::size_t target_col = ops.at(0).column;
  const Column& target = schema.column(target_col);
  const bool categorical = target.kind == ColumnKind::Categorical;

  std::vector<std::size_t> rows(seq.length());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  bool use_abs = false;
  std::size_t groupby_col = kNoIndex;

  for (std::size_t i = 1; i + 1 < ops.size(); ++i) {
    const Operator& op = ops[i];
    switch (op.type) {
      case OpType::FilterBy:
        std::erase_if(rows, [&](std::size_t r) {
          return seq.rows[r][op.column].category == op.category;
        });
        break;
      case OpType::RetainBy:
        std::erase_if(rows, [&](std::size_t r) {
          return seq.rows[r][op.column].category != op.category;
        });
        break;
      case OpType::SortBy:
        std::stable_sort(rows.begin(), rows.end(),
                         [&](std::size_t a, std::size_t b) {
                           const double va = seq.rows[a][op.column].number;
                           const double vb = seq.rows[b][op.column].number;
                           return op.ascending ? va < vb : va > vb;
                         });
        break;
      case OpType::Top5:
        if (rows.size() > 5) rows.resize(5);
        break;
      case OpType::Abs:
        use_abs = true;
        break;
      case OpType::GroupBy:
        groupby_col = op.column;
        break;
      default:
        throw std::logic_error("evaluate: invalid chain");
    }
  }

  const Operator& agg = ops.back();
  auto target_value = [&](std::size_t r, std::size_t dim) -> double {
    if (categorical)
      return seq.rows[r][target_col].category == dim ? 1.0 : 0.0;
    const double v = seq.rows[r][target_col].number;
    return use_abs ? std::abs(v) : v;
  };

  std::vector<double> out;
  if (categorical) {
    const std::size_t p = target.vocab.size();
    out.reserve(p);
    std::vector<double> values(rows.size());
    for (std::size_t dim = 0; dim < p; ++dim) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        values[i] = target_value(rows[i], dim);
      out.push_back(aggregate(values, agg));
    }
  } else if (groupby_col != kNoIndex) {
    const std::size_t p = schema.column(groupby_col).vocab.size();
    std::vector<std::vector<double>> groups(p);
    for (std::size_t r : rows)
      groups[seq.rows[r][groupby_col].category].push_back(target_value(r, 0));
    out.reserve(p);
    for (const auto& group : groups) out.push_back(aggregate(group, agg));
  } else {
    std::vector<double> values;
    values.reserve(rows.size());
    for (std::size_t r : rows) values.push_back(target_value(r, 0));
    out.push_back(aggregate(values, agg));
  }
  return out;
}

Eigen::MatrixXd evaluate_column(const StatisticChain& chain, const Dataset& d,
                                const std::vector<std::size_t>& indices) {
  const std::size_t dim = output_dim(chain, d.schema());
  Eigen::MatrixXd out(indices.size(), dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::vector<double> row =
        evaluate(chain, d.schema(), d.sequence(indices[i]));
    for (std::size_t j = 0; j < dim; ++j) out(Eigen::Index(i), Eigen::Index(j)) = row[j];
  }
  return out;
}

namespace {

std::string op_name(OpType type) {
  switch (type) {
    case OpType::Select: return "Select";
    case OpType::Mean: return "Mean";
    case OpType::Max: return "Max";
    case OpType::Min: return "Min";
    case OpType::Sum: return "Sum";
    case OpType::Std: return "Std";
    case OpType::Ptp: return "Ptp";
    case OpType::Count: return "Count";
    case OpType::First: return "First";
    case OpType::Percentile: return "Percentile";
    case OpType::GroupBy: return "GroupBy";
    case OpType::FilterBy: return "FilterBy";
    case OpType::RetainBy: return "RetainBy";
    case OpType::SortBy: return "SortBy";
    case OpType::Top5: return "Top5";
    case OpType::Abs: return "Abs";
  }
  return "?";
}

std::string render_op(const Operator& op, const Schema& schema,
                      const std::string& dim_entry) {
  std::string text = op_name(op.type);
  switch (op.type) {
    case OpType::Select:
      text += "[" + schema.column(op.column).name +
              (dim_entry.empty() ? "" : "=" + dim_entry) + "]";
      break;
    case OpType::GroupBy:
      text += "[" + schema.column(op.column).name +
              (dim_entry.empty() ? "" : "=" + dim_entry) + "]";
      break;
    case OpType::FilterBy:
    case OpType::RetainBy:
      text += "[" + schema.column(op.column).name + "=" +
              schema.column(op.column).vocab[op.category] + "]";
      break;
    case OpType::SortBy:
      text += "[" + schema.column(op.column).name + "," +
              (op.ascending ? "asc" : "desc") + "]";
      break;
    case OpType::Percentile:
      text += "[" + std::to_string(op.percentile) + "]";
      break;
    default:
      break;
  }
  return text;
}

std::string format_impl(const StatisticChain& chain, const Schema& schema,
                        std::size_t dim, bool with_dim) {
  const Column& target = schema.column(chain.ops.at(0).column);
  const bool categorical_target = target.kind == ColumnKind::Categorical;
  std::string out;
  for (std::size_t i = chain.ops.size(); i-- > 0;) {
    const Operator& op = chain.ops[i];
    std::string entry;
    if (with_dim) {
      if (op.type == OpType::Select && categorical_target)
        entry = target.vocab[dim];
      else if (op.type == OpType::GroupBy)
        entry = schema.column(op.column).vocab[dim];
    }
    out += render_op(op, schema, entry);
    if (i != 0) out += "∘";
  }
  return out;
}

}  // namespace

std::string format_chain(const StatisticChain& chain, const Schema& schema) {
  return format_impl(chain, schema, 0, false);
}

std::vector<std::string> column_labels(const StatisticChain& chain,
                                       const Schema& schema) {
  const std::size_t dim = output_dim(chain, schema);
  std::vector<std::string> labels;
  labels.reserve(dim);
  for (std::size_t j = 0; j < dim; ++j)
    labels.push_back(format_impl(chain, schema, j, dim > 1));
  return labels;
}

namespace {

struct Parser {
  const std::string& text;
  const Schema& schema;
  bool allow_dim = false;
  std::size_t pos = 0;
  std::string dim_entry;       // "col=entry" seen in a Select/GroupBy bracket
  std::size_t dim_column = kNoIndex;

  void skip_spaces() {
    while (pos < text.size() && text[pos] == ' ') ++pos;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ChainParseError(msg, pos);
  }

  std::string read_token(const char* stop_chars) {
    const std::size_t start = pos;
    while (pos < text.size() &&
           std::string(stop_chars).find(text[pos]) == std::string::npos)
      ++pos;
    if (pos == start) fail("expected a name");
    return text.substr(start, pos - start);
  }

  std::size_t require_column(const std::string& name) {
    auto idx = schema.find(name);
    if (!idx) fail("unknown column '" + name + "'");
    return *idx;
  }

  Operator parse_operator() {
    skip_spaces();
    const std::size_t name_start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) != 0))
      ++pos;
    const std::string name = text.substr(name_start, pos - name_start);
    if (name.empty()) fail("expected an operator name");

    auto bracket_arg = [&]() -> std::string {
      if (pos >= text.size() || text[pos] != '[')
        fail("operator '" + name + "' requires a [..] argument");
      ++pos;
      const std::string arg = read_token("]");
      if (pos >= text.size()) fail("unterminated '['");
      ++pos;  // ']'
      return arg;
    };

    Operator op;
    if (name == "Select" || name == "GroupBy") {
      op.type = name == "Select" ? OpType::Select : OpType::GroupBy;
      const std::string arg = bracket_arg();
      const std::size_t eq = arg.find('=');
      if (eq == std::string::npos) {
        op.column = require_column(arg);
      } else {
        if (!allow_dim)
          fail("unexpected '=' in " + name + " argument");
        if (!dim_entry.empty()) fail("more than one dimension label");
        op.column = require_column(arg.substr(0, eq));
        dim_entry = arg.substr(eq + 1);
        dim_column = op.column;
      }
    } else if (name == "FilterBy" || name == "RetainBy") {
      op.type = name == "FilterBy" ? OpType::FilterBy : OpType::RetainBy;
      const std::string arg = bracket_arg();
      const std::size_t eq = arg.find('=');
      if (eq == std::string::npos) fail("expected 'column=category'");
      op.column = require_column(arg.substr(0, eq));
      const Column& col = schema.column(op.column);
      if (col.kind != ColumnKind::Categorical)
        fail("column '" + col.name + "' is not categorical");
      const std::string cat = arg.substr(eq + 1);
      auto it = std::find(col.vocab.begin(), col.vocab.end(), cat);
      if (it == col.vocab.end())
        fail("category '" + cat + "' not in vocab of '" + col.name + "'");
      op.category = std::size_t(it - col.vocab.begin());
    } else if (name == "SortBy") {
      op.type = OpType::SortBy;
      const std::string arg = bracket_arg();
      const std::size_t comma = arg.find(',');
      if (comma == std::string::npos) fail("expected 'column,asc|desc'");
      op.column = require_column(arg.substr(0, comma));
      const std::string dir = arg.substr(comma + 1);
      if (dir == "asc")
        op.ascending = true;
      else if (dir == "desc")
        op.ascending = false;
      else
        fail("sort direction must be 'asc' or 'desc'");
    } else if (name == "Percentile") {
      op.type = OpType::Percentile;
      const std::string arg = bracket_arg();
      try {
        op.percentile = std::stoi(arg);
      } catch (...) {
        fail("bad percentile rank '" + arg + "'");
      }
      if (!column_ref_ok(op, schema))
        fail("unsupported percentile rank " + arg);
    } else if (name == "Mean") {
      op.type = OpType::Mean;
    } else if (name == "Max") {
      op.type = OpType::Max;
    } else if (name == "Min") {
      op.type = OpType::Min;
    } else if (name == "Sum") {
      op.type = OpType::Sum;
    } else if (name == "Std") {
      op.type = OpType::Std;
    } else if (name == "Ptp") {
      op.type = OpType::Ptp;
    } else if (name == "Count") {
      op.type = OpType::Count;
    } else if (name == "First") {
      op.type = OpType::First;
    } else if (name == "Top5") {
      op.type = OpType::Top5;
    } else if (name == "Abs") {
      op.type = OpType::Abs;
    } else {
      pos = name_start;
      fail("unknown operator '" + name + "'");
    }
    return op;
  }

  // Separator is "∘" or a lone ASCII "o"; returns false at end of input.
  bool parse_separator() {
    skip_spaces();
    if (pos >= text.size()) return false;
    if (text.compare(pos, 3, "∘") == 0) {
      pos += 3;
      return true;
    }
    if (text[pos] == 'o') {
      ++pos;
      return true;
    }
    fail("expected 'o' separator or end of input");
  }
};

}  // namespace

namespace {

LabeledChain parse_impl(const std::string& text, const Schema& schema,
                        bool allow_dim) {
  Parser parser{text, schema, allow_dim};
  std::vector<Operator> outer_first;
  outer_first.push_back(parser.parse_operator());
  while (parser.parse_separator())
    outer_first.push_back(parser.parse_operator());
  LabeledChain result;
  result.chain.ops.assign(outer_first.rbegin(), outer_first.rend());
  if (!parser.dim_entry.empty()) {
    const Column& col = schema.column(parser.dim_column);
    if (col.kind != ColumnKind::Categorical)
      throw ChainParseError("dimension label on non-categorical column", 0);
    result.dim = col.vocab_index(parser.dim_entry);
  }
  return result;
}

}  // namespace

StatisticChain parse_chain(const std::string& text, const Schema& schema) {
  return parse_impl(text, schema, false).chain;
}

LabeledChain parse_label(const std::string& text, const Schema& schema) {
  return parse_impl(text, schema, true);
}

}  // namespace rudi
