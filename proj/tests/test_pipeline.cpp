#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rudi/numerics.hpp"
#include "rudi/operators.hpp"
#include "rudi/pipeline.hpp"
#include "rudi/rng.hpp"
#include "rudi/synthetic.hpp"

using namespace rudi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rudi_pipe_" + std::to_string(getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& name = "") const {
    return (name.empty() ? path : path / name).string();
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

RunConfig tiny_config(const TempDir& dir, const std::string& out_name) {
  RunConfig c;
  c.events_path = dir.str("events.csv");
  c.schema_path = dir.str("schema.json");
  c.scores_path = dir.str("scores.tsv");
  c.out_dir = dir.str(out_name);
  c.seed = 11;
  c.valid_count = 5;
  c.max_depth = 2;
  c.num_stats = 3;
  c.search_batch = 16;
  c.simulations = 30;
  c.nln_layers = 1;
  c.nln_hidden = 4;
  c.nln_rules = 4;
  c.nln_epochs = 5;
  c.nln_batch = 16;
  return c;
}

}  // namespace

TEST_CASE("apply_override and load_config") {
  RunConfig c;
  apply_override(c, "seed=42");
  apply_override(c, "train_frac=0.7");
  apply_override(c, "noise_per_instance=false");
  apply_override(c, "out_dir=/tmp/somewhere");
  CHECK(c.seed == 42);
  CHECK(c.train_frac == 0.7);
  CHECK_FALSE(c.noise_per_instance);
  CHECK(c.out_dir == "/tmp/somewhere");
  CHECK_THROWS_AS(apply_override(c, "no_such_key=1"), PipelineError);
  CHECK_THROWS_AS(apply_override(c, "seed=abc"), PipelineError);
  CHECK_THROWS_AS(apply_override(c, "just-a-token"), PipelineError);

  TempDir dir;
  {
    std::ofstream out(dir.str("run.conf"));
    out << "# comment line\n";
    out << "seed = 9\n";
    out << "  nln_rules=6  # trailing comment\n";
    out << "\n";
  }
  const RunConfig loaded = load_config(dir.str("run.conf"));
  CHECK(loaded.seed == 9);
  CHECK(loaded.nln_rules == 6);

  {
    std::ofstream out(dir.str("bad.conf"));
    out << "seed=1\nbogus=2\n";
  }
  try {
    load_config(dir.str("bad.conf"));
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config(dir.str("missing.conf")), PipelineError);
}

TEST_CASE("config_hash tracks every run-affecting field") {
  RunConfig a;
  const std::uint64_t base = config_hash(a);
  CHECK(config_hash(a) == base);
  for (const std::string& pair :
       {"seed=1", "train_frac=0.5", "num_stats=7", "nln_epochs=3",
        "lr_start=0.2", "noise_per_instance=false", "events=other.csv"}) {
    RunConfig b;
    apply_override(b, pair);
    CHECK(config_hash(b) != base);
  }
  // output location does not change what is computed
  RunConfig c;
  apply_override(c, "out_dir=/elsewhere");
  CHECK(config_hash(c) == base);
}

TEST_CASE("values table round trip is bit-exact") {
  TempDir dir;
  Rng rng(4);
  ValuesTable table;
  table.labels = {"Sum∘Select[amount]", "Count∘Select[type=A]"};
  table.values.resize(12, 2);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 2; ++c) table.values(r, c) = rng.normal() * 1e3;
  save_values(table, dir.str("v.tsv"));
  const ValuesTable back = load_values(dir.str("v.tsv"));
  CHECK(back.labels == table.labels);
  REQUIRE(back.values.rows() == table.values.rows());
  CHECK((back.values - table.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("threshold, checkpoint and rules artifacts round trip") {
  TempDir dir;
  Rng rng(8);

  ThresholdModel model;
  model.labels = {"a", "b"};
  model.columns.push_back({true, {}});
  model.columns.push_back(
      {false, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}});
  save_threshold_model(model, 77, dir.str("t.json"));
  std::uint64_t h = 0;
  const ThresholdModel tm = load_threshold_model(dir.str("t.json"), &h);
  CHECK(h == 77);
  CHECK(tm.labels == model.labels);
  CHECK(tm.columns[0].passthrough);
  CHECK(tm.columns[1].thresholds == model.columns[1].thresholds);

  NlnConfig nc;
  nc.layers = 1;
  nc.hidden = 2;
  nc.rules = 2;
  nc.seed = 5;
  const std::size_t bits = literal_descriptors(model).size();
  const NlnParams params = init_params(bits, nc, rng);
  save_checkpoint(params, nc, model, {"Sum∘Select[a]"}, 77, dir.str("c.json"));
  const Checkpoint ckpt = load_checkpoint(dir.str("c.json"));
  CHECK(ckpt.hash == 77);
  CHECK(ckpt.nln.seed == 5);
  CHECK(ckpt.chains == std::vector<std::string>{"Sum∘Select[a]"});
  CHECK((ckpt.params.rule_weights - params.rule_weights)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((ckpt.params.layers[0].conj[0][0] - params.layers[0].conj[0][0])
            .cwiseAbs()
            .maxCoeff() == 0.0);

  const RuleSet ruleset = extract(params, literal_descriptors(model));
  save_rules(ruleset, model, {"Sum∘Select[a]"}, 77, dir.str("r.json"));
  const RulesFile file = load_rules(dir.str("r.json"));
  CHECK(file.hash == 77);
  REQUIRE(file.ruleset.rules.size() == ruleset.rules.size());
  Eigen::VectorXd row = Eigen::VectorXd::Zero(Eigen::Index(bits));
  for (int probe = 0; probe < 30; ++probe) {
    for (Eigen::Index i = 0; i < row.size(); ++i)
      row[i] = rng.below(2) ? 1.0 : 0.0;
    CHECK(score(file.ruleset, row) == score(ruleset, row));
  }
}

TEST_CASE("synthetic fixtures: valid chains, determinism, decorrelation") {
  nlohmann::json manifest;
  const Dataset single = make_synthetic("single-signal", 80, 3, manifest);
  CHECK(single.size() == 80);
  const std::string chain_text = manifest.at("signal_chain");
  const StatisticChain chain = parse_chain(chain_text, single.schema());
  CHECK(is_valid(chain, single.schema(), 4));

  nlohmann::json again;
  const Dataset repeat = make_synthetic("single-signal", 80, 3, again);
  for (std::size_t i = 0; i < 80; ++i)
    CHECK(repeat.scores()[i] == single.scores()[i]);

  nlohmann::json two;
  const Dataset pair = make_synthetic("two-signal", 120, 5, two);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pair.size(); ++i) idx.push_back(i);
  const Eigen::MatrixXd v1 = evaluate_column(
      parse_chain(two.at("signal_chains").at(0), pair.schema()), pair, idx);
  const Eigen::MatrixXd v2 = evaluate_column(
      parse_chain(two.at("signal_chains").at(1), pair.schema()), pair, idx);
  CHECK(std::fabs(pearson_corr(v1.col(0), v2.col(0))) < 0.1);

  nlohmann::json teacher;
  const Dataset rt = make_synthetic("rule-teacher", 150, 7, teacher);
  CHECK(teacher.at("rules").size() == 3);
  for (const auto& entry : teacher.at("rules"))
    CHECK(is_valid(parse_chain(entry.at("chain"), rt.schema()), rt.schema(), 4));

  CHECK_THROWS(make_synthetic("no-such-fixture", 50, 1, manifest));
}

TEST_CASE("run_all produces every artifact and is reproducible") {
  TempDir dir;
  write_synthetic("single-signal", 60, 21, dir.str());
  RunConfig config = tiny_config(dir, "out_a");
  run_all(config);

  for (const char* name :
       {"statistics.txt", "statistics.values.tsv", "thresholds.json",
        "checkpoint.json", "rules.json", "rules.txt", "evaluation.txt"})
    CHECK(fs::exists(fs::path(config.out_dir) / name));

  const std::string eval = slurp(fs::path(config.out_dir) / "evaluation.txt");
  for (const char* key :
       {"test_users: ", "rules: ", "literal_occurrences: ", "fidelity: ",
        "auc"})
    CHECK(eval.find(key) != std::string::npos);

  // statistics.txt lines are "chain<TAB>reward" with parseable chains
  nlohmann::json manifest;
  const Dataset d = make_synthetic("single-signal", 60, 21, manifest);
  std::ifstream stats(fs::path(config.out_dir) / "statistics.txt");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(stats, line)) {
    const std::size_t tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    CHECK_NOTHROW(parse_chain(line.substr(0, tab), d.schema()));
    const double reward = std::stod(line.substr(tab + 1));
    CHECK(reward >= 0.0);
    CHECK(reward <= 1.0 + 1e-12);
    ++lines;
  }
  CHECK(lines == config.num_stats);

  RunConfig rerun = config;
  rerun.out_dir = dir.str("out_b");
  run_all(rerun);
  for (const char* name : {"statistics.txt", "statistics.values.tsv",
                           "thresholds.json", "rules.json", "rules.txt"})
    CHECK(slurp(fs::path(config.out_dir) / name) ==
          slurp(fs::path(rerun.out_dir) / name));
}

TEST_CASE("stages reject missing inputs and foreign artifacts") {
  TempDir dir;
  write_synthetic("single-signal", 60, 2, dir.str());
  RunConfig config = tiny_config(dir, "out");

  // downstream stages cannot run before their inputs exist
  CHECK_THROWS_AS(run_binarize(config), PipelineError);
  CHECK_THROWS_AS(run_train(config), PipelineError);

  RunConfig missing = config;
  missing.events_path = dir.str("nope.csv");
  CHECK_THROWS_AS(run_gen_stats(missing), PipelineError);

  run_gen_stats(config);
  run_binarize(config);

  // a config change after binarize invalidates the threshold artifact
  RunConfig altered = config;
  altered.seed = 999;
  try {
    run_train(altered);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("config hash mismatch") !=
          std::string::npos);
  }

  run_train(config);
  run_extract(config);
  RunConfig altered2 = config;
  altered2.nln_epochs += 1;
  CHECK_THROWS_AS(run_evaluate(altered2), PipelineError);
  run_evaluate(config);
}
