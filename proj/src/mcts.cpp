#include "rudi/mcts.hpp"

#include <cmath>
#include <iostream>

#include "rudi/numerics.hpp"

namespace rudi {

double uct_score(const SearchNode& child, std::size_t parent_visits, double c) {
  const double mean = child.cum_reward / double(child.visits);
  const double exploration =
      c * std::sqrt(2.0 * std::log(double(parent_visits)) / double(child.visits));
  return mean + exploration;
}

double reward(const StatisticChain& chain, const Dataset& d,
              const std::vector<std::size_t>& batch,
              const Eigen::VectorXd& target) {
  const Eigen::MatrixXd values = evaluate_column(chain, d, batch);
  Eigen::VectorXd target_batch(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    target_batch[Eigen::Index(i)] = target[Eigen::Index(batch[i])];
  if (values.cols() == 1)
    return std::abs(pearson_corr(values.col(0), target_batch));
  return multiple_corr(values, target_batch);
}

StatisticChain rollout(const StatisticChain& prefix, const Schema& schema,
                       std::size_t max_depth,
                       const std::set<std::string>& excluded, Rng& rng) {
  StatisticChain chain = prefix;
  while (chain.ops.empty() || !is_aggregation(chain.ops.back().type)) {
    const std::vector<Operator> candidates =
        valid_next_operators(chain, schema, max_depth, excluded);
    if (candidates.empty())
      throw SearchError("rollout: no valid non-excluded completion from '" +
                        format_chain(chain, schema) + "'");
    chain.ops.push_back(candidates[rng.below(candidates.size())]);
  }
  return chain;
}

namespace {

std::unique_ptr<SearchNode> make_child(SearchNode& parent, const Operator& op,
                                       const Schema& schema,
                                       const SearchConfig& config,
                                       const std::set<std::string>& excluded) {
  auto child = std::make_unique<SearchNode>();
  child->state = parent.state;
  child->state.ops.push_back(op);
  child->action = op;
  child->parent = &parent;
  child->terminal = is_valid(child->state, schema, config.max_depth);
  if (!child->terminal)
    child->untried =
        valid_next_operators(child->state, schema, config.max_depth, excluded);
  return child;
}

void backpropagate(SearchNode* node, double r) {
  for (; node != nullptr; node = node->parent) {
    node->visits += 1;
    node->cum_reward += r;
  }
}

}  // namespace

void grow_tree(SearchNode& root, const Dataset& d, const Eigen::VectorXd& target,
               const SearchConfig& config, const std::set<std::string>& excluded,
               Rng& rng) {
  const Schema& schema = d.schema();
  constexpr int kRetryBudget = 50;
  for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
    SearchNode* v = &root;
    while (!v->terminal) {
      if (!v->untried.empty()) {
        const Operator op = v->untried.front();
        v->untried.erase(v->untried.begin());
        v->children.push_back(make_child(*v, op, schema, config, excluded));
        v = v->children.back().get();
        break;
      }
      if (v->children.empty())
        throw SearchError("grow_tree: node has no expandable children");
      SearchNode* best = nullptr;
      double best_score = -1.0;
      for (const auto& child : v->children) {
        const double score =
            uct_score(*child, v->visits, config.exploration_c);
        if (best == nullptr || score > best_score) {
          best = child.get();
          best_score = score;
        }
      }
      v = best;
    }

    StatisticChain chain;
    if (v->terminal) {
      chain = v->state;
    } else {
      try {
        chain = rollout(v->state, schema, config.max_depth, excluded, rng);
      } catch (const SearchError&) {
        // dead end under the exclusion set: prune the child and retry
        SearchNode* parent = v->parent;
        if (parent == nullptr) throw;
        std::erase_if(parent->children,
                      [&](const auto& c) { return c.get() == v; });
        continue;
      }
    }

    const std::vector<std::size_t> batch =
        sample_batch(d, config.batch_size, rng);
    backpropagate(v, reward(chain, d, batch, target));
    return;
  }
  throw SearchError("grow_tree: retry budget exhausted");
}

StatisticChain generate_statistic(const Dataset& d, const Eigen::VectorXd& target,
                                  const SearchConfig& config,
                                  const std::set<std::string>& excluded,
                                  Rng& rng) {
  const Schema& schema = d.schema();
  Eigen::VectorXd yhat = target;
  if (config.zscore_target) {
    const double mean = yhat.mean();
    const double sd =
        std::sqrt((yhat.array() - mean).square().sum() / double(yhat.size()));
    if (sd > 0.0) yhat = (yhat.array() - mean) / sd;
  }

  StatisticChain prefix;
  while (prefix.ops.size() < config.max_depth) {
    SearchNode root;
    root.state = prefix;
    root.is_root = true;
    root.untried =
        valid_next_operators(prefix, schema, config.max_depth, excluded);
    if (root.untried.empty())
      throw SearchError("generate_statistic: statistic space exhausted");
    for (std::size_t it = 0; it < config.simulations; ++it)
      grow_tree(root, d, yhat, config, excluded, rng);

    const SearchNode* best = nullptr;
    double best_mean = -1.0;
    for (const auto& child : root.children) {
      if (child->visits == 0) continue;
      const double mean = child->cum_reward / double(child->visits);
      if (best == nullptr || mean > best_mean) {
        best = child.get();
        best_mean = mean;
      }
    }
    if (best == nullptr)
      throw SearchError("generate_statistic: no visited child");
    prefix = best->state;
    if (is_valid(prefix, schema, config.max_depth)) return prefix;
  }
  throw SearchError("generate_statistic: depth bound reached without a valid "
                    "statistic");
}

std::vector<GeneratedStatistic> generate_top_k(const Dataset& d,
                                               const SearchConfig& config) {
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      d.scores().data(), Eigen::Index(d.size()));
  Eigen::VectorXd yhat = y;
  Rng rng(config.seed);
  std::set<std::string> excluded;
  std::vector<std::size_t> all_indices(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) all_indices[i] = i;

  std::vector<GeneratedStatistic> result;
  std::vector<Eigen::MatrixXd> value_matrices;
  for (std::size_t k = 0; k < config.num_stats; ++k) {
    StatisticChain chain;
    try {
      chain = generate_statistic(d, yhat, config, excluded, rng);
    } catch (const SearchError& e) {
      std::cerr << "warning: statistic space exhausted after " << k
                << " statistics (" << e.what() << ")\n";
      break;
    }
    GeneratedStatistic gen;
    gen.chain = chain;
    gen.values = evaluate_column(chain, d, all_indices);
    gen.reward = gen.values.cols() == 1
                     ? std::abs(pearson_corr(gen.values.col(0), yhat))
                     : multiple_corr(gen.values, yhat);
    excluded.insert(format_chain(chain, d.schema()));
    value_matrices.push_back(gen.values);
    result.push_back(std::move(gen));
    yhat = residualize(y, value_matrices);
  }
  return result;
}

}  // namespace rudi
