#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "rudi/pipeline.hpp"
#include "rudi/synthetic.hpp"

namespace {

// Collected as key=value pairs so named flags and --set share one code path;
// flags are appended after --set entries and therefore win.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> flag_overrides;
};

void add_flag_option(CLI::App* cmd, CommonOpts& opts, const std::string& flag,
                     const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag,
      [&opts, key](const std::string& value) {
        opts.flag_overrides.push_back(key + "=" + value);
      },
      help);
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path,
                  "key=value configuration file");
  cmd->add_option("--set", opts.overrides,
                  "override a configuration key (key=value, repeatable)");
  add_flag_option(cmd, opts, "--seed", "seed", "global seed");
  add_flag_option(cmd, opts, "--threads", "threads", "worker threads");
  add_flag_option(cmd, opts, "--out", "out_dir", "artifact directory");
}

void add_search_flags(CLI::App* cmd, CommonOpts& opts,
                      const std::string& batch_flag = "--batch-size") {
  add_flag_option(cmd, opts, "--depth", "max_depth", "statistic depth bound");
  add_flag_option(cmd, opts, "--num-stats", "num_stats",
                  "statistics to generate");
  add_flag_option(cmd, opts, batch_flag, "search_batch", "reward batch size");
  add_flag_option(cmd, opts, "--simulations", "simulations",
                  "tree iterations per position");
}

void add_train_flags(CLI::App* cmd, CommonOpts& opts,
                     const std::string& batch_flag = "--batch-size") {
  add_flag_option(cmd, opts, "--layers", "nln_layers", "logical layers");
  add_flag_option(cmd, opts, "--hidden", "nln_hidden", "neurons per part");
  add_flag_option(cmd, opts, "--rules", "nln_rules", "rule count (even)");
  add_flag_option(cmd, opts, "--epochs", "nln_epochs", "training epochs");
  add_flag_option(cmd, opts, batch_flag, "nln_batch", "training batch size");
  add_flag_option(cmd, opts, "--lr-start", "lr_start", "initial learning rate");
  add_flag_option(cmd, opts, "--lr-end", "lr_end", "final learning rate");
  add_flag_option(cmd, opts, "--tau-start", "tau_start",
                  "initial temperature");
  add_flag_option(cmd, opts, "--tau-end", "tau_end", "final temperature");
}

rudi::RunConfig resolve(const CommonOpts& opts) {
  rudi::RunConfig config;
  if (!opts.config_path.empty()) config = rudi::load_config(opts.config_path);
  for (const std::string& pair : opts.overrides)
    rudi::apply_override(config, pair);
  for (const std::string& pair : opts.flag_overrides)
    rudi::apply_override(config, pair);
  Eigen::setNbThreads(config.threads);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rudi: distill a sequence scoring model into weighted rules"};
  app.require_subcommand(1);

  CommonOpts gen_opts, bin_opts, train_opts, ext_opts, eval_opts, all_opts;
  CLI::App* gen =
      app.add_subcommand("gen-stats", "search for predictive statistics");
  add_common(gen, gen_opts);
  add_search_flags(gen, gen_opts);
  add_common(app.add_subcommand("binarize",
                                "fit literal thresholds on the training split"),
             bin_opts);
  CLI::App* tr = app.add_subcommand("train", "train the logical network");
  add_common(tr, train_opts);
  add_train_flags(tr, train_opts);
  add_common(app.add_subcommand("extract", "extract the discrete rule set"),
             ext_opts);
  add_common(app.add_subcommand("evaluate",
                                "score the rule set on the test split"),
             eval_opts);
  CLI::App* all = app.add_subcommand("run-all", "run every stage in order");
  add_common(all, all_opts);
  add_search_flags(all, all_opts, "--search-batch-size");
  add_train_flags(all, all_opts, "--train-batch-size");

  std::string fixture = "single-signal";
  std::size_t users = 200;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  CLI::App* synth =
      app.add_subcommand("make-synthetic", "generate a benchmark dataset");
  synth->add_option("--fixture", fixture,
                    "single-signal, two-signal or rule-teacher");
  synth->add_option("--users", users, "number of users");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-stats"))
      rudi::run_gen_stats(resolve(gen_opts));
    else if (app.got_subcommand("binarize"))
      rudi::run_binarize(resolve(bin_opts));
    else if (app.got_subcommand("train"))
      rudi::run_train(resolve(train_opts));
    else if (app.got_subcommand("extract"))
      rudi::run_extract(resolve(ext_opts));
    else if (app.got_subcommand("evaluate"))
      rudi::run_evaluate(resolve(eval_opts));
    else if (app.got_subcommand("run-all"))
      rudi::run_all(resolve(all_opts));
    else if (app.got_subcommand("make-synthetic"))
      rudi::write_synthetic(fixture, users, seed, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
