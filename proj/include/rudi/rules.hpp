#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rudi/binarize.hpp"
#include "rudi/nln.hpp"

namespace rudi {

enum class ExprKind { Literal, NegLiteral, True, False, And, Or };

// Immutable boolean expression tree; leaves reference literal descriptors by
// index (or are constants), internal nodes are binary AND/OR.
struct BoolExpr {
  ExprKind kind;
  std::size_t literal = 0;  // for Literal/NegLiteral
  std::shared_ptr<const BoolExpr> left;
  std::shared_ptr<const BoolExpr> right;
};
using ExprPtr = std::shared_ptr<const BoolExpr>;

ExprPtr make_literal(std::size_t index, bool negated);
ExprPtr make_constant(bool value);
ExprPtr make_binary(ExprKind kind, ExprPtr left, ExprPtr right);

struct Rule {
  double weight = 0.0;
  ExprPtr expr;
};

struct RuleSet {
  std::vector<Rule> rules;
  std::vector<LiteralDescriptor> descriptors;
};

// Argmax-wires every selector, unfolds through the skip-connected layers
// down to augmented-input leaves, and simplifies with the constant/idempotent
// rewrites. rules[r] carries rule weight w_r.
RuleSet extract(const NlnParams& params,
                const std::vector<LiteralDescriptor>& descriptors);

bool eval_expr(const BoolExpr& expr, const Eigen::VectorXd& literal_row);

// Weighted sum over rules; bit-identical to forward_hard on the augmented
// input of the same literal row.
double score(const RuleSet& ruleset, const Eigen::VectorXd& literal_row);

// Constant/idempotent rewrites: AND(x,true)=x, AND(x,false)=false,
// OR(x,false)=x, OR(x,true)=true, AND(x,x)=x, OR(x,x)=x.
ExprPtr simplify(const ExprPtr& expr);

// Number of (possibly repeated) literal leaves.
std::size_t literal_count(const BoolExpr& expr);

// Fraction of ordered pairs (i != j) where the strict-order indicators of
// teacher and student agree (logical XNOR).
double fidelity(const Eigen::VectorXd& teacher, const Eigen::VectorXd& student);

// Mann-Whitney AUC with 0.5 credit for tied scores. Throws if only one class
// is present.
double auc(const std::vector<int>& labels, const Eigen::VectorXd& scores);

std::string render_expr(const BoolExpr& expr,
                        const std::vector<LiteralDescriptor>& descriptors);
// One line per rule: signed 4-decimal weight, rendered expression.
std::string render(const RuleSet& ruleset);

}  // namespace rudi
