#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "rudi/binarize.hpp"
#include "rudi/dataset.hpp"
#include "rudi/mcts.hpp"
#include "rudi/operators.hpp"
#include "rudi/pipeline.hpp"
#include "rudi/rules.hpp"
#include "rudi/synthetic.hpp"

namespace py = pybind11;
using namespace rudi;

namespace {

RunConfig config_from_options(const std::map<std::string, std::string>& options) {
  RunConfig config;
  for (const auto& [key, value] : options)
    apply_override(config, key + "=" + value);
  return config;
}

Eigen::MatrixXd evaluate_chain(const Dataset& d, const std::string& chain_text) {
  const StatisticChain chain = parse_chain(chain_text, d.schema());
  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) idx[i] = i;
  return evaluate_column(chain, d, idx);
}

}  // namespace

PYBIND11_MODULE(_rudi, m) {
  m.doc() = "Rule distillation toolkit: statistic search, network training "
            "and rule extraction over event-sequence datasets";

  py::register_exception<DatasetError>(m, "DatasetError");
  py::register_exception<ChainParseError>(m, "ChainParseError");
  py::register_exception<SearchError>(m, "SearchError");
  py::register_exception<PipelineError>(m, "PipelineError");

  py::class_<Dataset>(m, "Dataset")
      .def_static(
          "load",
          [](const std::string& events, const std::string& schema,
             const std::string& scores) {
            return load_dataset(events, schema, scores);
          },
          py::arg("events"), py::arg("schema"), py::arg("scores"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("scores",
                             [](const Dataset& d) { return d.scores(); })
      .def_property_readonly("user_ids", [](const Dataset& d) {
        std::vector<std::string> ids;
        for (const EventSequence& seq : d.sequences())
          ids.push_back(seq.user_id);
        return ids;
      });

  m.def(
      "evaluate_chain", &evaluate_chain, py::arg("dataset"), py::arg("chain"),
      "Evaluates a statistic chain on every user; returns an (N, d) array");

  m.def(
      "chain_labels",
      [](const Dataset& d, const std::string& chain_text) {
        return column_labels(parse_chain(chain_text, d.schema()), d.schema());
      },
      py::arg("dataset"), py::arg("chain"));

  m.def(
      "is_valid_chain",
      [](const Dataset& d, const std::string& chain_text,
         std::size_t max_depth) {
        try {
          return is_valid(parse_chain(chain_text, d.schema()), d.schema(),
                          max_depth);
        } catch (const ChainParseError&) {
          return false;
        }
      },
      py::arg("dataset"), py::arg("chain"), py::arg("max_depth") = 4);

  m.def(
      "generate_statistics",
      [](const Dataset& d, std::size_t num_stats, std::size_t max_depth,
         std::size_t simulations, std::size_t batch_size, std::uint64_t seed) {
        SearchConfig config;
        config.num_stats = num_stats;
        config.max_depth = max_depth;
        config.simulations = simulations;
        config.batch_size = batch_size;
        config.seed = seed;
        std::vector<std::pair<std::string, double>> out;
        for (const GeneratedStatistic& stat : generate_top_k(d, config))
          out.emplace_back(format_chain(stat.chain, d.schema()), stat.reward);
        return out;
      },
      py::arg("dataset"), py::arg("num_stats") = 20, py::arg("max_depth") = 4,
      py::arg("simulations") = 500, py::arg("batch_size") = 128,
      py::arg("seed") = 0,
      "Greedy top-K statistic search; returns (chain, reward) pairs");

  m.def(
      "fidelity",
      [](const Eigen::VectorXd& teacher, const Eigen::VectorXd& student) {
        return fidelity(teacher, student);
      },
      py::arg("teacher"), py::arg("student"));

  m.def(
      "auc",
      [](const std::vector<int>& labels, const Eigen::VectorXd& scores) {
        return auc(labels, scores);
      },
      py::arg("labels"), py::arg("scores"));

  m.def(
      "score_rules",
      [](const std::string& rules_path, const Dataset& d) {
        const RulesFile file = load_rules(rules_path);
        std::vector<std::size_t> idx(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) idx[i] = i;
        Eigen::MatrixXd values(Eigen::Index(d.size()), 0);
        std::vector<Eigen::MatrixXd> blocks;
        Eigen::Index cols = 0;
        for (const std::string& text : file.chains) {
          blocks.push_back(
              evaluate_column(parse_chain(text, d.schema()), d, idx));
          cols += blocks.back().cols();
        }
        values.resize(Eigen::Index(d.size()), cols);
        Eigen::Index at = 0;
        for (const Eigen::MatrixXd& block : blocks) {
          values.middleCols(at, block.cols()) = block;
          at += block.cols();
        }
        const LiteralTable literals = transform(values, file.thresholds);
        Eigen::VectorXd out(Eigen::Index(d.size()));
        for (Eigen::Index r = 0; r < out.size(); ++r)
          out[r] = score(file.ruleset, literals.bits.row(r).transpose());
        return out;
      },
      py::arg("rules_path"), py::arg("dataset"),
      "Replays a saved rule set on a dataset; returns the student scores");

  m.def(
      "rendered_rules",
      [](const std::string& rules_path) {
        return render(load_rules(rules_path).ruleset);
      },
      py::arg("rules_path"));

  m.def(
      "make_synthetic",
      [](const std::string& name, std::size_t users, std::uint64_t seed,
         const std::string& out_dir) {
        write_synthetic(name, users, seed, out_dir);
      },
      py::arg("name"), py::arg("users"), py::arg("seed"), py::arg("out_dir"),
      "Writes schema.json, events.csv, scores.tsv and manifest.json");

  const auto stage = [](void (*fn)(const RunConfig&)) {
    return [fn](const std::map<std::string, std::string>& options) {
      fn(config_from_options(options));
    };
  };
  m.def("run_gen_stats", stage(&run_gen_stats), py::arg("options"));
  m.def("run_binarize", stage(&run_binarize), py::arg("options"));
  m.def("run_train", stage(&run_train), py::arg("options"));
  m.def("run_extract", stage(&run_extract), py::arg("options"));
  m.def("run_evaluate", stage(&run_evaluate), py::arg("options"));
  m.def("run_all", stage(&run_all), py::arg("options"),
        "Runs every stage; options are the same key=value pairs the CLI "
        "accepts, e.g. {'events': 'events.csv', 'seed': '7'}");
}
