#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rudi/binarize.hpp"
#include "rudi/dataset.hpp"
#include "rudi/mcts.hpp"
#include "rudi/nln.hpp"
#include "rudi/rules.hpp"

namespace rudi {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One flat configuration drives every stage; artifacts are stamped with a
// hash of it so stage outputs cannot be mixed across runs. Stage seeds are
// derived from `seed` with fixed indices: 0 = split, 1 = statistic search,
// 2 = network training.
struct RunConfig {
  std::string events_path;
  std::string schema_path;
  std::string scores_path;
  std::string out_dir = ".";

  std::uint64_t seed = 0;
  double train_frac = 0.8;
  std::size_t valid_count = 20;
  int threads = 1;

  std::size_t max_depth = 4;
  std::size_t num_stats = 20;
  std::size_t search_batch = 128;
  std::size_t simulations = 500;

  std::size_t nln_layers = 2;
  std::size_t nln_hidden = 20;
  std::size_t nln_rules = 20;
  std::size_t nln_epochs = 500;
  std::size_t nln_batch = 128;
  double lr_start = 0.1;
  double lr_end = 0.001;
  double tau_start = 1.0;
  double tau_end = 0.0001;
  bool noise_per_instance = true;

  SearchConfig search_config() const;
  NlnConfig nln_config() const;
};

// key=value file, one pair per line, '#' comments and blank lines ignored.
RunConfig load_config(const std::string& path);
// Applies "key=value" strings on top of `config`; unknown keys throw.
void apply_override(RunConfig& config, const std::string& pair);

// FNV-1a over a canonical rendering of every field.
std::uint64_t config_hash(const RunConfig& config);

// Artifact names inside config.out_dir.
//   statistics.txt         one "chain<TAB>reward" line per statistic
//   statistics.values.tsv  full-dataset values, labeled columns
//   thresholds.json        train-fitted binarization model
//   checkpoint.json        trained network + everything needed downstream
//   rules.json             self-describing rule set
//   rules.txt              rendered rules, one per line
//   evaluation.txt         "key: value" metric lines
void run_gen_stats(const RunConfig& config);
void run_binarize(const RunConfig& config);
void run_train(const RunConfig& config);
void run_extract(const RunConfig& config);
void run_evaluate(const RunConfig& config);
void run_all(const RunConfig& config);

// Serialization shared by the stages and the acceptance tests.
void save_threshold_model(const ThresholdModel& model, std::uint64_t hash,
                          const std::string& path);
ThresholdModel load_threshold_model(const std::string& path,
                                    std::uint64_t* hash = nullptr);
void save_checkpoint(const NlnParams& params, const NlnConfig& nln,
                     const ThresholdModel& thresholds,
                     const std::vector<std::string>& chains,
                     std::uint64_t hash, const std::string& path);
struct Checkpoint {
  NlnParams params;
  NlnConfig nln;
  ThresholdModel thresholds;
  std::vector<std::string> chains;
  std::uint64_t hash = 0;
};
Checkpoint load_checkpoint(const std::string& path);
void save_rules(const RuleSet& ruleset, const ThresholdModel& thresholds,
                const std::vector<std::string>& chains, std::uint64_t hash,
                const std::string& path);
struct RulesFile {
  RuleSet ruleset;
  ThresholdModel thresholds;
  std::vector<std::string> chains;
  std::uint64_t hash = 0;
};
RulesFile load_rules(const std::string& path);

struct ValuesTable {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;  // N x P
};
void save_values(const ValuesTable& table, const std::string& path);
ValuesTable load_values(const std::string& path);

}  // namespace rudi
