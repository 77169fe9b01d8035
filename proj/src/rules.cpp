#include "rudi/rules.hpp"

#include <cstdio>
#include <set>
#include <stdexcept>

namespace rudi {

ExprPtr make_literal(std::size_t index, bool negated) {
  auto node = std::make_shared<BoolExpr>();
  node->kind = negated ? ExprKind::NegLiteral : ExprKind::Literal;
  node->literal = index;
  return node;
}

ExprPtr make_constant(bool value) {
  auto node = std::make_shared<BoolExpr>();
  node->kind = value ? ExprKind::True : ExprKind::False;
  return node;
}

ExprPtr make_binary(ExprKind kind, ExprPtr left, ExprPtr right) {
  auto node = std::make_shared<BoolExpr>();
  node->kind = kind;
  node->left = std::move(left);
  node->right = std::move(right);
  return node;
}

namespace {

bool structurally_equal(const BoolExpr& a, const BoolExpr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::Literal:
    case ExprKind::NegLiteral:
      return a.literal == b.literal;
    case ExprKind::True:
    case ExprKind::False:
      return true;
    default:
      return structurally_equal(*a.left, *b.left) &&
             structurally_equal(*a.right, *b.right);
  }
}

}  // namespace

ExprPtr simplify(const ExprPtr& expr) {
  if (expr->kind != ExprKind::And && expr->kind != ExprKind::Or) return expr;
  const ExprPtr left = simplify(expr->left);
  const ExprPtr right = simplify(expr->right);
  const bool conjunction = expr->kind == ExprKind::And;
  const ExprKind absorbing = conjunction ? ExprKind::False : ExprKind::True;
  const ExprKind neutral = conjunction ? ExprKind::True : ExprKind::False;
  if (left->kind == absorbing || right->kind == absorbing)
    return make_constant(!conjunction);
  if (left->kind == neutral) return right;
  if (right->kind == neutral) return left;
  if (structurally_equal(*left, *right)) return left;
  return make_binary(expr->kind, left, right);
}

namespace {

// Resolves an index into layer output z^l to an expression over the literals.
ExprPtr resolve(const NlnParams& params,
                const std::vector<std::vector<std::size_t>>& wiring,
                std::size_t l, std::size_t index) {
  if (l == 0) {
    // augmented input: [literals, negations, 1, 0]
    const std::size_t p = params.input_bits;
    if (index < p) return make_literal(index, false);
    if (index < 2 * p) return make_literal(index - p, true);
    return make_constant(index == 2 * p);
  }
  const LogicalLayer& layer = params.layers[l - 1];
  const std::size_t neurons = layer.num_conj() + layer.num_disj();
  if (index >= neurons)  // skip connection into the previous layer
    return resolve(params, wiring, l - 1, index - neurons);
  const bool conjunction = index < layer.num_conj();
  const std::size_t a = wiring[l - 1][2 * index];
  const std::size_t b = wiring[l - 1][2 * index + 1];
  return make_binary(conjunction ? ExprKind::And : ExprKind::Or,
                     resolve(params, wiring, l - 1, a),
                     resolve(params, wiring, l - 1, b));
}

std::size_t argmax_index(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return std::size_t(best);
}

}  // namespace

RuleSet extract(const NlnParams& params,
                const std::vector<LiteralDescriptor>& descriptors) {
  if (descriptors.size() != params.input_bits)
    throw std::invalid_argument("extract: descriptor count mismatch");

  // precompute the argmax wiring (2 inputs per neuron, conj before disj)
  std::vector<std::vector<std::size_t>> wiring;
  for (const LogicalLayer& layer : params.layers) {
    std::vector<std::size_t> w;
    for (const auto& sel : layer.conj) {
      w.push_back(argmax_index(sel[0]));
      w.push_back(argmax_index(sel[1]));
    }
    for (const auto& sel : layer.disj) {
      w.push_back(argmax_index(sel[0]));
      w.push_back(argmax_index(sel[1]));
    }
    wiring.push_back(std::move(w));
  }

  RuleSet ruleset;
  ruleset.descriptors = descriptors;
  const std::size_t num_rules = params.num_rules();
  const std::size_t last = params.layers.size();
  const LogicalLayer& last_layer = params.layers.back();
  for (std::size_t r = 0; r < num_rules; ++r) {
    const bool conjunction = r < last_layer.num_conj();
    const std::size_t a = wiring[last - 1][2 * r];
    const std::size_t b = wiring[last - 1][2 * r + 1];
    ExprPtr expr = make_binary(conjunction ? ExprKind::And : ExprKind::Or,
                               resolve(params, wiring, last - 1, a),
                               resolve(params, wiring, last - 1, b));
    Rule rule;
    rule.weight = params.rule_weights[Eigen::Index(r)];
    rule.expr = simplify(expr);
    ruleset.rules.push_back(std::move(rule));
  }
  return ruleset;
}

bool eval_expr(const BoolExpr& expr, const Eigen::VectorXd& literal_row) {
  switch (expr.kind) {
    case ExprKind::Literal:
      return literal_row[Eigen::Index(expr.literal)] != 0.0;
    case ExprKind::NegLiteral:
      return literal_row[Eigen::Index(expr.literal)] == 0.0;
    case ExprKind::True:
      return true;
    case ExprKind::False:
      return false;
    case ExprKind::And:
      return eval_expr(*expr.left, literal_row) &&
             eval_expr(*expr.right, literal_row);
    case ExprKind::Or:
      return eval_expr(*expr.left, literal_row) ||
             eval_expr(*expr.right, literal_row);
  }
  return false;
}

double score(const RuleSet& ruleset, const Eigen::VectorXd& literal_row) {
  if (!ruleset.rules.empty() &&
      std::size_t(literal_row.size()) != ruleset.descriptors.size())
    throw std::invalid_argument("score: literal row length mismatch");
  // same accumulation order as the network's prediction layer
  double sum = 0.0;
  for (const Rule& rule : ruleset.rules)
    sum += rule.weight * (eval_expr(*rule.expr, literal_row) ? 1.0 : 0.0);
  return sum;
}

std::size_t literal_count(const BoolExpr& expr) {
  switch (expr.kind) {
    case ExprKind::Literal:
    case ExprKind::NegLiteral:
      return 1;
    case ExprKind::And:
    case ExprKind::Or:
      return literal_count(*expr.left) + literal_count(*expr.right);
    default:
      return 0;
  }
}

double fidelity(const Eigen::VectorXd& teacher,
                const Eigen::VectorXd& student) {
  const Eigen::Index n = teacher.size();
  if (n != student.size())
    throw std::invalid_argument("fidelity: length mismatch");
  if (n < 2) throw std::invalid_argument("fidelity: need >= 2");
  std::size_t agree = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if ((teacher[i] > teacher[j]) == (student[i] > student[j])) ++agree;
    }
  return double(agree) / (double(n) * double(n - 1));
}

double auc(const std::vector<int>& labels, const Eigen::VectorXd& scores) {
  if (labels.size() != std::size_t(scores.size()))
    throw std::invalid_argument("auc: length mismatch");
  std::size_t positives = 0;
  for (int label : labels) positives += label != 0 ? 1 : 0;
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0)
    throw std::invalid_argument("auc: both classes must be present");
  double credit = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      const double sp = scores[Eigen::Index(i)];
      const double sn = scores[Eigen::Index(j)];
      credit += sp > sn ? 1.0 : (sp == sn ? 0.5 : 0.0);
    }
  }
  return credit / (double(positives) * double(negatives));
}

namespace {

void collect_leaf_signs(const BoolExpr& expr, std::set<std::size_t>& positive,
                        std::set<std::size_t>& negative) {
  switch (expr.kind) {
    case ExprKind::Literal:
      positive.insert(expr.literal);
      break;
    case ExprKind::NegLiteral:
      negative.insert(expr.literal);
      break;
    case ExprKind::And:
    case ExprKind::Or:
      collect_leaf_signs(*expr.left, positive, negative);
      collect_leaf_signs(*expr.right, positive, negative);
      break;
    default:
      break;
  }
}

std::string render_operand(const BoolExpr& expr,
                           const std::vector<LiteralDescriptor>& descriptors) {
  return "(" + render_expr(expr, descriptors) + ")";
}

}  // namespace

std::string render_expr(const BoolExpr& expr,
                        const std::vector<LiteralDescriptor>& descriptors) {
  switch (expr.kind) {
    case ExprKind::Literal:
      return descriptors.at(expr.literal).render;
    case ExprKind::NegLiteral:
      return "NOT " + descriptors.at(expr.literal).render;
    case ExprKind::True:
      return "TRUE";
    case ExprKind::False:
      return "FALSE";
    case ExprKind::And:
      return render_operand(*expr.left, descriptors) + " AND " +
             render_operand(*expr.right, descriptors);
    case ExprKind::Or:
      return render_operand(*expr.left, descriptors) + " OR " +
             render_operand(*expr.right, descriptors);
  }
  return "";
}

std::string render(const RuleSet& ruleset) {
  std::string out;
  for (const Rule& rule : ruleset.rules) {
    char weight[32];
    std::snprintf(weight, sizeof(weight), "%+.4f", rule.weight);
    out += weight;
    out += "  ";
    if (rule.expr->kind == ExprKind::True)
      out += "TRUE (bias)";
    else
      out += render_expr(*rule.expr, ruleset.descriptors);
    std::set<std::size_t> positive, negative;
    collect_leaf_signs(*rule.expr, positive, negative);
    for (std::size_t lit : positive)
      if (negative.count(lit)) {
        out += "  [warning: contains a literal and its negation]";
        break;
      }
    out += "\n";
  }
  return out;
}

}  // namespace rudi
