#pragma once

#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rudi/dataset.hpp"
#include "rudi/operators.hpp"
#include "rudi/rng.hpp"

namespace rudi {

struct SearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SearchConfig {
  std::size_t max_depth = 4;     // D
  std::size_t num_stats = 20;    // K
  std::size_t batch_size = 128;  // B
  std::size_t simulations = 500;
  double exploration_c = 0.70710678118654752440;  // 1/sqrt(2)
  std::uint64_t seed = 0;
  // z-scores the target before reward computation inside a tree; correlation
  // is scale-invariant so this only affects numerical conditioning
  bool zscore_target = true;
};

struct SearchNode {
  StatisticChain state;
  Operator action;  // operator that produced this node; unset for the root
  bool is_root = false;
  bool terminal = false;
  double cum_reward = 0.0;  // Q
  std::size_t visits = 0;   // C
  std::vector<Operator> untried;
  std::vector<std::unique_ptr<SearchNode>> children;
  SearchNode* parent = nullptr;
};

struct GeneratedStatistic {
  StatisticChain chain;
  Eigen::MatrixXd values;  // N x output_dim, full-dataset evaluation
  double reward = 0.0;     // against the residual target at selection time
};

double uct_score(const SearchNode& child, std::size_t parent_visits, double c);

// Batch-correlation reward: |pearson| for scalar statistics, multiple
// correlation for vector-valued ones. Always in [0, 1].
double reward(const StatisticChain& chain, const Dataset& d,
              const std::vector<std::size_t>& batch,
              const Eigen::VectorXd& target);

// Uniform random completion of `prefix` to a valid non-excluded statistic.
// Throws SearchError if no completion exists.
StatisticChain rollout(const StatisticChain& prefix, const Schema& schema,
                       std::size_t max_depth,
                       const std::set<std::string>& excluded, Rng& rng);

// One selection/expansion/simulation/backpropagation iteration.
void grow_tree(SearchNode& root, const Dataset& d, const Eigen::VectorXd& target,
               const SearchConfig& config, const std::set<std::string>& excluded,
               Rng& rng);

// Builds one statistic operator by operator, running a fresh tree of
// `config.simulations` iterations per position and committing the best child.
StatisticChain generate_statistic(const Dataset& d, const Eigen::VectorXd& target,
                                  const SearchConfig& config,
                                  const std::set<std::string>& excluded,
                                  Rng& rng);

// The full top-K loop with exclusion and residualized targets. May return
// fewer than K statistics (with a warning on stderr) if the space runs out.
std::vector<GeneratedStatistic> generate_top_k(const Dataset& d,
                                               const SearchConfig& config);

}  // namespace rudi
