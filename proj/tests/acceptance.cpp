// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rudi/binarize.hpp"
#include "rudi/dataset.hpp"
#include "rudi/mcts.hpp"
#include "rudi/nln.hpp"
#include "rudi/numerics.hpp"
#include "rudi/operators.hpp"
#include "rudi/pipeline.hpp"
#include "rudi/rng.hpp"
#include "rudi/rules.hpp"
#include "rudi/synthetic.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace rudi;
namespace fs = std::filesystem;

namespace {

struct Reporter {
  int failures = 0;

  void run(const std::string& name, double time_limit_s,
           const std::function<bool(std::string&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (time_limit_s > 0.0 && elapsed > time_limit_s) {
      ok = false;
      detail += (detail.empty() ? "" : "; ");
      detail += "time limit " + std::to_string(time_limit_s) + "s exceeded";
    }
    std::printf("[%s] %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                elapsed, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("rudi_accept_" + std::to_string(getpid()) + "_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Schema three_column_schema() {
  return Schema({{"kind", ColumnKind::Categorical, {"A", "B", "C"}},
                 {"amount", ColumnKind::Numerical, {}},
                 {"latency", ColumnKind::Numerical, {}}});
}

StatisticChain random_valid_chain(const Schema& s, std::size_t max_depth,
                                  Rng& rng) {
  StatisticChain chain;
  for (;;) {
    const auto choices = valid_next_operators(chain, s, max_depth, {});
    chain.ops.push_back(choices[std::size_t(rng.below(choices.size()))]);
    if (is_valid(chain, s, max_depth)) return chain;
  }
}

double best_fit(const Eigen::MatrixXd& values, const Eigen::VectorXd& y) {
  return multiple_corr(values, y);
}

double max_abs_corr(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const Eigen::VectorXd col = X.col(c);
    if ((col.array() - col[0]).abs().maxCoeff() == 0.0) continue;
    worst = std::max(worst, std::fabs(pearson_corr(y, col)));
  }
  return worst;
}

bool evaluator_matches_oracle(std::string& detail) {
  const Schema s = three_column_schema();
  Rng rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const StatisticChain chain = random_valid_chain(s, 4, rng);
    const EventSequence seq = testutil::random_seq(s, "u", 20, rng);
    const std::vector<double> got = evaluate(chain, s, seq);
    const std::vector<double> want = oracle::evaluate(chain, s, seq);
    if (got.size() != want.size()) {
      detail = "dimension mismatch on " + format_chain(chain, s);
      return false;
    }
    for (std::size_t d = 0; d < got.size(); ++d) {
      const double tol = 1e-9 * std::max(1.0, std::fabs(want[d]));
      if (std::fabs(got[d] - want[d]) > tol) {
        detail = "value mismatch on " + format_chain(chain, s);
        return false;
      }
    }
  }
  detail = "1000 random chains, depth <= 4";
  return true;
}

bool grammar_sound_and_complete(std::string& detail) {
  const Schema s = testutil::card_schema();
  std::set<std::string> valid_set;
  oracle::enumerate_chains(s, 3, [&](const StatisticChain& chain) {
    if (is_valid(chain, s, 3)) valid_set.insert(format_chain(chain, s));
  });

  std::set<std::string> reachable;
  std::function<void(const StatisticChain&)> rec =
      [&](const StatisticChain& prefix) {
        for (const Operator& op : valid_next_operators(prefix, s, 3, {})) {
          StatisticChain next = prefix;
          next.ops.push_back(op);
          if (is_valid(next, s, 3)) {
            reachable.insert(format_chain(next, s));
            continue;
          }
          rec(next);
        }
      };
  rec({});

  detail = std::to_string(valid_set.size()) + " valid chains at depth 3";
  return valid_set == reachable && !valid_set.empty();
}

bool search_recovers_planted_signal(std::string& detail) {
  nlohmann::json manifest;
  const Dataset d = make_synthetic("single-signal", 2000, 101, manifest);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      d.scores().data(), Eigen::Index(d.size()));

  SearchConfig config;  // stock search settings
  config.num_stats = 5;
  config.seed = 7;
  const auto stats = generate_top_k(d, config);
  if (stats.empty()) {
    detail = "search returned no statistics";
    return false;
  }
  const double top_fit = best_fit(stats[0].values, y);

  Rng rng(55);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < d.size(); ++i) idx.push_back(i);
  double best_random = 0.0;
  for (int r = 0; r < 5; ++r) {
    const StatisticChain chain = random_valid_chain(d.schema(), 4, rng);
    best_random =
        std::max(best_random, best_fit(evaluate_column(chain, d, idx), y));
  }

  std::ostringstream msg;
  msg << "top statistic " << format_chain(stats[0].chain, d.schema())
      << ", fit " << top_fit << ", best of 5 random " << best_random;
  detail = msg.str();
  return top_fit >= 0.95 && top_fit - best_random >= 0.2;
}

bool residual_targets_decorrelate(std::string& detail) {
  nlohmann::json manifest;
  const Dataset d = make_synthetic("two-signal", 1000, 202, manifest);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      d.scores().data(), Eigen::Index(d.size()));

  SearchConfig config;
  config.num_stats = 2;
  config.seed = 13;
  const auto stats = generate_top_k(d, config);
  if (stats.size() != 2) {
    detail = "expected 2 statistics, got " + std::to_string(stats.size());
    return false;
  }
  const Eigen::VectorXd residual = residualize(y, {stats[0].values});
  const double leftover = max_abs_corr(residual, stats[0].values);
  double cross = 0.0;
  for (Eigen::Index a = 0; a < stats[0].values.cols(); ++a)
    for (Eigen::Index b = 0; b < stats[1].values.cols(); ++b) {
      const Eigen::VectorXd ca = stats[0].values.col(a);
      const Eigen::VectorXd cb = stats[1].values.col(b);
      if ((ca.array() - ca[0]).abs().maxCoeff() == 0.0) continue;
      if ((cb.array() - cb[0]).abs().maxCoeff() == 0.0) continue;
      cross = std::max(cross, std::fabs(pearson_corr(ca, cb)));
    }

  std::ostringstream msg;
  msg << "residual corr " << leftover << ", cross corr " << cross;
  detail = msg.str();
  return leftover <= 1e-8 && cross < 0.5;
}

bool gradients_match_finite_differences(std::string& detail) {
  NlnConfig c;
  c.layers = 2;
  c.hidden = 3;
  c.rules = 4;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    worst = std::max(worst, grad_check(6, c, 1.0, rng));
  }
  std::ostringstream msg;
  msg << "max relative error " << worst << " over 10 seeds";
  detail = msg.str();
  return worst <= 1e-4;
}

bool rules_replay_hard_network(std::string& detail) {
  Rng rng(66);
  std::size_t exhaustive = 0, randomized = 0;

  // exhaustive over every input when the bit space is small
  for (std::uint64_t trial = 0; trial < 4; ++trial) {
    NlnConfig c;
    c.layers = 1 + trial % 3;
    c.hidden = 4;
    c.rules = 6;
    const std::size_t bits = 7 + trial % 3;
    const NlnParams p = init_params(bits, c, rng);
    std::vector<LiteralDescriptor> descriptors;
    for (std::size_t i = 0; i < bits; ++i) {
      LiteralDescriptor desc;
      desc.label = "x" + std::to_string(i);
      desc.render = desc.label + " > 0";
      descriptors.push_back(std::move(desc));
    }
    const RuleSet rs = extract(p, descriptors);
    for (std::uint64_t mask = 0; mask < (1ULL << bits); ++mask) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(Eigen::Index(bits));
      for (std::size_t b = 0; b < bits; ++b)
        row[Eigen::Index(b)] = (mask >> b) & 1 ? 1.0 : 0.0;
      if (score(rs, row) != forward_hard(p, augment(row)).prediction) {
        detail = "mismatch at exhaustive probe";
        return false;
      }
      ++exhaustive;
    }
  }

  // 10000 random probes on a wider network
  NlnConfig c;
  c.layers = 2;
  c.hidden = 8;
  c.rules = 10;
  const std::size_t bits = 24;
  const NlnParams p = init_params(bits, c, rng);
  std::vector<LiteralDescriptor> descriptors;
  for (std::size_t i = 0; i < bits; ++i) {
    LiteralDescriptor desc;
    desc.label = "x" + std::to_string(i);
    desc.render = desc.label + " > 0";
    descriptors.push_back(std::move(desc));
  }
  const RuleSet rs = extract(p, descriptors);
  for (int probe = 0; probe < 10000; ++probe) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(Eigen::Index(bits));
    for (std::size_t b = 0; b < bits; ++b)
      row[Eigen::Index(b)] = rng.below(2) ? 1.0 : 0.0;
    if (score(rs, row) != forward_hard(p, augment(row)).prediction) {
      detail = "mismatch at random probe";
      return false;
    }
    ++randomized;
  }

  std::ostringstream msg;
  msg << exhaustive << " exhaustive + " << randomized
      << " random probes, all bit-exact";
  detail = msg.str();
  return true;
}

std::map<std::string, std::string> parse_report(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t colon = line.find(": ");
    if (colon == std::string::npos) continue;
    kv[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return kv;
}

bool end_to_end_distills_rule_teacher(std::string& detail) {
  const fs::path data = fresh_dir("e2e_data");
  const fs::path out = fresh_dir("e2e_out");
  write_synthetic("rule-teacher", 5000, 404, data.string());

  RunConfig config;
  config.events_path = (data / "events.csv").string();
  config.schema_path = (data / "schema.json").string();
  config.scores_path = (data / "scores.tsv").string();
  config.out_dir = out.string();
  config.seed = 5;
  config.train_frac = 0.8;
  config.valid_count = 20;
  config.num_stats = 6;
  config.simulations = 150;
  config.nln_layers = 2;
  config.nln_hidden = 8;
  config.nln_rules = 8;
  config.nln_epochs = 150;
  config.nln_batch = 128;
  run_all(config);

  const auto report = parse_report(out / "evaluation.txt");
  const double fid = std::stod(report.at("fidelity"));
  const double auc_value = std::stod(report.at("auc"));

  const RulesFile file = load_rules((out / "rules.json").string());
  std::size_t longest = 0;
  for (const Rule& rule : file.ruleset.rules)
    longest = std::max(longest, literal_count(*rule.expr));

  std::ostringstream msg;
  msg << "fidelity " << fid << ", auc " << auc_value << ", longest rule "
      << longest << " literals";
  detail = msg.str();
  fs::remove_all(data);
  fs::remove_all(out);
  return fid >= 0.90 && auc_value >= 0.85 && longest <= 4;
}

bool metric_closed_forms(std::string& detail) {
  Eigen::VectorXd t(3), flat(3);
  t << 1.0, 2.0, 3.0;
  flat << 1.0, 1.0, 1.0;
  Eigen::VectorXd down(3);
  down << 3.0, 2.0, 1.0;
  bool ok = true;
  ok = ok && std::fabs(fidelity(t, t) - 1.0) <= 1e-12;
  ok = ok && std::fabs(fidelity(t, down) - 0.0) <= 1e-12;
  ok = ok && std::fabs(fidelity(t, flat) - 0.5) <= 1e-12;

  Eigen::VectorXd sep(4), mixed(4);
  sep << 0.1, 0.2, 0.8, 0.9;
  mixed << 0.1, 0.4, 0.5, 0.8;
  ok = ok && std::fabs(auc({0, 0, 1, 1}, sep) - 1.0) <= 1e-12;
  ok = ok && std::fabs(auc({0, 1, 0, 1}, Eigen::VectorXd::Constant(4, 2.0)) -
                       0.5) <= 1e-12;
  ok = ok && std::fabs(auc({0, 1, 0, 1}, mixed) - 0.75) <= 1e-12;
  detail = "fidelity and AUC closed forms within 1e-12";
  return ok;
}

bool pipeline_is_deterministic(std::string& detail) {
  const fs::path data = fresh_dir("det_data");
  write_synthetic("single-signal", 300, 77, data.string());

  RunConfig config;
  config.events_path = (data / "events.csv").string();
  config.schema_path = (data / "schema.json").string();
  config.scores_path = (data / "scores.tsv").string();
  config.seed = 3;
  config.num_stats = 4;
  config.simulations = 60;
  config.search_batch = 64;
  config.nln_layers = 2;
  config.nln_hidden = 6;
  config.nln_rules = 6;
  config.nln_epochs = 30;
  config.nln_batch = 64;

  const fs::path out1 = fresh_dir("det_out1");
  const fs::path out2 = fresh_dir("det_out2");
  config.out_dir = out1.string();
  run_all(config);
  config.out_dir = out2.string();
  run_all(config);

  bool ok = true;
  for (const char* name : {"statistics.txt", "statistics.values.tsv",
                           "rules.json", "rules.txt"})
    ok = ok && slurp(out1 / name) == slurp(out2 / name);
  detail = ok ? "statistics and rules artifacts byte-identical"
              : "artifacts differ between identically seeded runs";
  fs::remove_all(data);
  fs::remove_all(out1);
  fs::remove_all(out2);
  return ok;
}

}  // namespace

int main() {
  Reporter reporter;
  reporter.run("evaluator matches brute-force oracle", 30.0,
               evaluator_matches_oracle);
  reporter.run("chain grammar is sound and complete", 10.0,
               grammar_sound_and_complete);
  reporter.run("search recovers a planted signal", 300.0,
               search_recovers_planted_signal);
  reporter.run("residual targets decorrelate statistics", 300.0,
               residual_targets_decorrelate);
  reporter.run("analytic gradients match finite differences", 10.0,
               gradients_match_finite_differences);
  reporter.run("extracted rules replay the discrete network", 60.0,
               rules_replay_hard_network);
  reporter.run("end-to-end distillation of a rule teacher", 900.0,
               end_to_end_distills_rule_teacher);
  reporter.run("metric closed forms are exact", 10.0, metric_closed_forms);
  reporter.run("identical seeds give identical artifacts", 300.0,
               pipeline_is_deterministic);
  return reporter.failures == 0 ? 0 : 1;
}
