#include "rudi/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rudi/numerics.hpp"
#include "rudi/operators.hpp"

namespace rudi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& stage, const std::string& msg) {
  throw PipelineError(stage + ": " + msg);
}

std::ifstream open_or_fail(const std::string& stage, const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(stage, "cannot open " + path.string());
  return in;
}

std::ofstream create_or_fail(const std::string& stage, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(stage, "cannot write " + path.string());
  return out;
}

json read_json(const std::string& stage, const fs::path& path) {
  std::ifstream in = open_or_fail(stage, path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(stage, path.string() + ": " + e.what());
  }
  return doc;
}

void check_hash(const std::string& stage, const RunConfig& config,
                std::uint64_t artifact_hash, const fs::path& path) {
  if (artifact_hash != config_hash(config))
    fail(stage, path.string() +
                    " was produced under a different configuration "
                    "(config hash mismatch)");
}

Dataset load_input(const std::string& stage, const RunConfig& config) {
  try {
    return load_dataset(config.events_path, config.schema_path,
                        config.scores_path);
  } catch (const DatasetError& e) {
    fail(stage, e.what());
  }
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

SplitIndices config_split(const std::string& stage, const RunConfig& config,
                          std::size_t n) {
  try {
    return split_indices(n, config.train_frac, config.valid_count,
                         stage_seed(config.seed, 0));
  } catch (const DatasetError& e) {
    fail(stage, e.what());
  }
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m,
                          const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(Eigen::Index(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(Eigen::Index(i)) = m.row(Eigen::Index(rows[i]));
  return out;
}

Eigen::VectorXd take_values(const std::vector<double>& v,
                            const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[Eigen::Index(i)] = v[rows[i]];
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(Eigen::Index(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[Eigen::Index(i)] = arr.at(i).get<double>();
  return v;
}

json expr_to_json(const BoolExpr& expr) {
  switch (expr.kind) {
    case ExprKind::Literal:
      return json{{"lit", expr.literal}};
    case ExprKind::NegLiteral:
      return json{{"neg", expr.literal}};
    case ExprKind::True:
      return json{{"const", true}};
    case ExprKind::False:
      return json{{"const", false}};
    case ExprKind::And:
      return json{{"op", "and"},
                  {"left", expr_to_json(*expr.left)},
                  {"right", expr_to_json(*expr.right)}};
    case ExprKind::Or:
      return json{{"op", "or"},
                  {"left", expr_to_json(*expr.left)},
                  {"right", expr_to_json(*expr.right)}};
  }
  return json();
}

ExprPtr expr_from_json(const json& node) {
  if (node.contains("lit")) return make_literal(node.at("lit"), false);
  if (node.contains("neg")) return make_literal(node.at("neg"), true);
  if (node.contains("const")) return make_constant(node.at("const"));
  const std::string op = node.at("op");
  if (op != "and" && op != "or")
    throw PipelineError("rules file: unknown expression op '" + op + "'");
  return make_binary(op == "and" ? ExprKind::And : ExprKind::Or,
                     expr_from_json(node.at("left")),
                     expr_from_json(node.at("right")));
}

json thresholds_to_json(const ThresholdModel& model) {
  json cols = json::array();
  for (const auto& rule : model.columns) {
    json entry;
    entry["passthrough"] = rule.passthrough;
    if (!rule.passthrough) entry["thresholds"] = rule.thresholds;
    cols.push_back(std::move(entry));
  }
  return json{{"labels", model.labels}, {"columns", std::move(cols)}};
}

ThresholdModel thresholds_from_json(const json& doc) {
  ThresholdModel model;
  model.labels = doc.at("labels").get<std::vector<std::string>>();
  for (const json& entry : doc.at("columns")) {
    ThresholdModel::ColumnRule rule;
    rule.passthrough = entry.at("passthrough");
    if (!rule.passthrough)
      rule.thresholds = entry.at("thresholds").get<std::vector<double>>();
    model.columns.push_back(std::move(rule));
  }
  if (model.columns.size() != model.labels.size())
    throw PipelineError("thresholds file: label/column count mismatch");
  return model;
}

json nln_config_to_json(const NlnConfig& c) {
  return json{{"layers", c.layers},
              {"hidden", c.hidden},
              {"rules", c.rules},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr_start", c.lr_start},
              {"lr_end", c.lr_end},
              {"tau_start", c.tau_start},
              {"tau_end", c.tau_end},
              {"seed", c.seed},
              {"noise_per_instance", c.noise_per_instance}};
}

NlnConfig nln_config_from_json(const json& doc) {
  NlnConfig c;
  c.layers = doc.at("layers");
  c.hidden = doc.at("hidden");
  c.rules = doc.at("rules");
  c.epochs = doc.at("epochs");
  c.batch_size = doc.at("batch_size");
  c.lr_start = doc.at("lr_start");
  c.lr_end = doc.at("lr_end");
  c.tau_start = doc.at("tau_start");
  c.tau_end = doc.at("tau_end");
  c.seed = doc.at("seed");
  c.noise_per_instance = doc.at("noise_per_instance");
  return c;
}

json params_to_json(const NlnParams& params) {
  json layers = json::array();
  for (const LogicalLayer& layer : params.layers) {
    json conj = json::array(), disj = json::array();
    for (const auto& sel : layer.conj)
      conj.push_back(json::array({vector_to_json(sel[0]),
                                  vector_to_json(sel[1])}));
    for (const auto& sel : layer.disj)
      disj.push_back(json::array({vector_to_json(sel[0]),
                                  vector_to_json(sel[1])}));
    layers.push_back(json{{"in_dim", layer.in_dim},
                          {"conj", std::move(conj)},
                          {"disj", std::move(disj)}});
  }
  return json{{"input_bits", params.input_bits},
              {"hidden", params.hidden},
              {"layers", std::move(layers)},
              {"rule_weights", vector_to_json(params.rule_weights)}};
}

NlnParams params_from_json(const json& doc) {
  NlnParams params;
  params.input_bits = doc.at("input_bits");
  params.hidden = doc.at("hidden");
  for (const json& entry : doc.at("layers")) {
    LogicalLayer layer;
    layer.in_dim = entry.at("in_dim");
    for (const json& sel : entry.at("conj"))
      layer.conj.push_back(
          {vector_from_json(sel.at(0)), vector_from_json(sel.at(1))});
    for (const json& sel : entry.at("disj"))
      layer.disj.push_back(
          {vector_from_json(sel.at(0)), vector_from_json(sel.at(1))});
    params.layers.push_back(std::move(layer));
  }
  params.rule_weights = vector_from_json(doc.at("rule_weights"));
  return params;
}

void write_json_file(const std::string& stage, const fs::path& path,
                     const json& doc) {
  std::ofstream out = create_or_fail(stage, path);
  out << doc.dump(2) << "\n";
}

std::vector<std::string> read_chain_list(const std::string& stage,
                                         const fs::path& path) {
  std::ifstream in = open_or_fail(stage, path);
  std::vector<std::string> chains;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    chains.push_back(tab == std::string::npos ? line : line.substr(0, tab));
  }
  if (chains.empty()) fail(stage, path.string() + " lists no statistics");
  return chains;
}

}  // namespace

SearchConfig RunConfig::search_config() const {
  SearchConfig sc;
  sc.max_depth = max_depth;
  sc.num_stats = num_stats;
  sc.batch_size = search_batch;
  sc.simulations = simulations;
  sc.seed = stage_seed(seed, 1);
  return sc;
}

NlnConfig RunConfig::nln_config() const {
  NlnConfig nc;
  nc.layers = nln_layers;
  nc.hidden = nln_hidden;
  nc.rules = nln_rules;
  nc.epochs = nln_epochs;
  nc.batch_size = nln_batch;
  nc.lr_start = lr_start;
  nc.lr_end = lr_end;
  nc.tau_start = tau_start;
  nc.tau_end = tau_end;
  nc.noise_per_instance = noise_per_instance;
  nc.seed = stage_seed(seed, 2);
  return nc;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T parsed{};
  auto res =
      std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw PipelineError("config: bad value for " + key + ": '" + value + "'");
  return parsed;
}

// from_chars for double is incomplete on some standard libraries
double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw PipelineError("config: bad value for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw PipelineError("config: bad value for " + key + ": '" + value + "'");
}

}  // namespace

void apply_override(RunConfig& config, const std::string& pair) {
  const std::size_t eq = pair.find('=');
  if (eq == std::string::npos)
    throw PipelineError("config: expected key=value, got '" + pair + "'");
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  };
  const std::string key = trim(pair.substr(0, eq));
  const std::string value = trim(pair.substr(eq + 1));

  if (key == "events") config.events_path = value;
  else if (key == "schema") config.schema_path = value;
  else if (key == "scores") config.scores_path = value;
  else if (key == "out_dir") config.out_dir = value;
  else if (key == "seed") config.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "train_frac") config.train_frac = parse_real(key, value);
  else if (key == "valid_count")
    config.valid_count = parse_number<std::size_t>(key, value);
  else if (key == "threads") config.threads = parse_number<int>(key, value);
  else if (key == "max_depth")
    config.max_depth = parse_number<std::size_t>(key, value);
  else if (key == "num_stats")
    config.num_stats = parse_number<std::size_t>(key, value);
  else if (key == "search_batch")
    config.search_batch = parse_number<std::size_t>(key, value);
  else if (key == "simulations")
    config.simulations = parse_number<std::size_t>(key, value);
  else if (key == "nln_layers")
    config.nln_layers = parse_number<std::size_t>(key, value);
  else if (key == "nln_hidden")
    config.nln_hidden = parse_number<std::size_t>(key, value);
  else if (key == "nln_rules")
    config.nln_rules = parse_number<std::size_t>(key, value);
  else if (key == "nln_epochs")
    config.nln_epochs = parse_number<std::size_t>(key, value);
  else if (key == "nln_batch")
    config.nln_batch = parse_number<std::size_t>(key, value);
  else if (key == "lr_start") config.lr_start = parse_real(key, value);
  else if (key == "lr_end") config.lr_end = parse_real(key, value);
  else if (key == "tau_start") config.tau_start = parse_real(key, value);
  else if (key == "tau_end") config.tau_end = parse_real(key, value);
  else if (key == "noise_per_instance")
    config.noise_per_instance = parse_bool(key, value);
  else throw PipelineError("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("config: cannot open " + path);
  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    // trim
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    try {
      apply_override(config, line.substr(begin, end - begin + 1));
    } catch (const PipelineError& e) {
      throw PipelineError(std::string(e.what()) + " (line " +
                          std::to_string(lineno) + " of " + path + ")");
    }
  }
  return config;
}

std::uint64_t config_hash(const RunConfig& c) {
  std::string text;
  auto put = [&](const std::string& key, const std::string& value) {
    text += key;
    text += '=';
    text += value;
    text += '\n';
  };
  put("events", c.events_path);
  put("schema", c.schema_path);
  put("scores", c.scores_path);
  put("seed", std::to_string(c.seed));
  put("train_frac", format_value(c.train_frac));
  put("valid_count", std::to_string(c.valid_count));
  put("max_depth", std::to_string(c.max_depth));
  put("num_stats", std::to_string(c.num_stats));
  put("search_batch", std::to_string(c.search_batch));
  put("simulations", std::to_string(c.simulations));
  put("nln_layers", std::to_string(c.nln_layers));
  put("nln_hidden", std::to_string(c.nln_hidden));
  put("nln_rules", std::to_string(c.nln_rules));
  put("nln_epochs", std::to_string(c.nln_epochs));
  put("nln_batch", std::to_string(c.nln_batch));
  put("lr_start", format_value(c.lr_start));
  put("lr_end", format_value(c.lr_end));
  put("tau_start", format_value(c.tau_start));
  put("tau_end", format_value(c.tau_end));
  put("noise_per_instance", c.noise_per_instance ? "true" : "false");

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char byte : text) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_values(const ValuesTable& table, const std::string& path) {
  std::ofstream out = create_or_fail("values", path);
  if (table.labels.size() != std::size_t(table.values.cols()))
    throw PipelineError("values: label/column count mismatch");
  for (std::size_t c = 0; c < table.labels.size(); ++c) {
    if (c) out << '\t';
    out << table.labels[c];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      if (c) out << '\t';
      out << format_value(table.values(r, c));
    }
    out << '\n';
  }
}

ValuesTable load_values(const std::string& path) {
  std::ifstream in = open_or_fail("values", path);
  std::string line;
  if (!std::getline(in, line))
    throw PipelineError("values: " + path + " is empty");
  ValuesTable table;
  {
    std::stringstream header(line);
    std::string label;
    while (std::getline(header, label, '\t')) table.labels.push_back(label);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, '\t'))
      row.push_back(parse_real("values", field));
    if (row.size() != table.labels.size())
      throw PipelineError("values: row " + std::to_string(rows.size() + 2) +
                          " has " + std::to_string(row.size()) +
                          " fields, header has " +
                          std::to_string(table.labels.size()));
    rows.push_back(std::move(row));
  }
  table.values.resize(Eigen::Index(rows.size()),
                      Eigen::Index(table.labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < table.labels.size(); ++c)
      table.values(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
  return table;
}

void save_threshold_model(const ThresholdModel& model, std::uint64_t hash,
                          const std::string& path) {
  json doc = thresholds_to_json(model);
  doc["config_hash"] = hash;
  write_json_file("binarize", path, doc);
}

ThresholdModel load_threshold_model(const std::string& path,
                                    std::uint64_t* hash) {
  const json doc = read_json("binarize", path);
  if (hash) *hash = doc.at("config_hash");
  try {
    return thresholds_from_json(doc);
  } catch (const json::exception& e) {
    throw PipelineError("thresholds file " + path + ": " + e.what());
  }
}

void save_checkpoint(const NlnParams& params, const NlnConfig& nln,
                     const ThresholdModel& thresholds,
                     const std::vector<std::string>& chains,
                     std::uint64_t hash, const std::string& path) {
  json doc;
  doc["config_hash"] = hash;
  doc["nln_config"] = nln_config_to_json(nln);
  doc["params"] = params_to_json(params);
  doc["thresholds"] = thresholds_to_json(thresholds);
  doc["chains"] = chains;
  write_json_file("train", path, doc);
}

Checkpoint load_checkpoint(const std::string& path) {
  const json doc = read_json("checkpoint", path);
  Checkpoint ckpt;
  try {
    ckpt.hash = doc.at("config_hash");
    ckpt.nln = nln_config_from_json(doc.at("nln_config"));
    ckpt.params = params_from_json(doc.at("params"));
    ckpt.thresholds = thresholds_from_json(doc.at("thresholds"));
    ckpt.chains = doc.at("chains").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw PipelineError("checkpoint file " + path + ": " + e.what());
  }
  return ckpt;
}

void save_rules(const RuleSet& ruleset, const ThresholdModel& thresholds,
                const std::vector<std::string>& chains, std::uint64_t hash,
                const std::string& path) {
  json rules = json::array();
  for (const Rule& rule : ruleset.rules) {
    json entry;
    entry["weight"] = rule.weight;
    entry["expr"] = expr_to_json(*rule.expr);
    entry["rendered"] = render_expr(*rule.expr, ruleset.descriptors);
    rules.push_back(std::move(entry));
  }
  json doc;
  doc["config_hash"] = hash;
  doc["thresholds"] = thresholds_to_json(thresholds);
  doc["chains"] = chains;
  doc["rules"] = std::move(rules);
  write_json_file("extract", path, doc);
}

RulesFile load_rules(const std::string& path) {
  const json doc = read_json("rules", path);
  RulesFile file;
  try {
    file.hash = doc.at("config_hash");
    file.thresholds = thresholds_from_json(doc.at("thresholds"));
    file.chains = doc.at("chains").get<std::vector<std::string>>();
    file.ruleset.descriptors = literal_descriptors(file.thresholds);
    for (const json& entry : doc.at("rules")) {
      Rule rule;
      rule.weight = entry.at("weight");
      rule.expr = expr_from_json(entry.at("expr"));
      file.ruleset.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw PipelineError("rules file " + path + ": " + e.what());
  }
  return file;
}

namespace {

// Re-evaluates the persisted chains on a dataset, concatenating the value
// columns in statistic order so they line up with the threshold model.
ValuesTable evaluate_chains(const std::string& stage, const Dataset& d,
                            const std::vector<std::string>& chains) {
  ValuesTable table;
  std::vector<Eigen::MatrixXd> blocks;
  std::size_t total = 0;
  const std::vector<std::size_t> idx = all_indices(d.size());
  for (const std::string& text : chains) {
    StatisticChain chain;
    try {
      chain = parse_chain(text, d.schema());
    } catch (const ChainParseError& e) {
      fail(stage, std::string("cannot parse statistic '") + text +
                      "': " + e.what());
    }
    Eigen::MatrixXd values = evaluate_column(chain, d, idx);
    const std::vector<std::string> labels = column_labels(chain, d.schema());
    table.labels.insert(table.labels.end(), labels.begin(), labels.end());
    total += std::size_t(values.cols());
    blocks.push_back(std::move(values));
  }
  table.values.resize(Eigen::Index(d.size()), Eigen::Index(total));
  Eigen::Index col = 0;
  for (const Eigen::MatrixXd& block : blocks) {
    table.values.middleCols(col, block.cols()) = block;
    col += block.cols();
  }
  return table;
}

Eigen::VectorXd student_scores(const RuleSet& ruleset,
                               const Eigen::MatrixXd& bits) {
  Eigen::VectorXd out(bits.rows());
  for (Eigen::Index r = 0; r < bits.rows(); ++r)
    out[r] = score(ruleset, bits.row(r).transpose());
  return out;
}

}  // namespace

void run_gen_stats(const RunConfig& config) {
  const std::string stage = "gen-stats";
  const Dataset d = load_input(stage, config);
  SplitResult parts;
  try {
    parts = split(d, config.train_frac, config.valid_count,
                  stage_seed(config.seed, 0));
  } catch (const DatasetError& e) {
    fail(stage, e.what());
  }

  std::vector<GeneratedStatistic> stats;
  try {
    stats = generate_top_k(parts.train, config.search_config());
  } catch (const SearchError& e) {
    fail(stage, e.what());
  }

  fs::create_directories(config.out_dir);
  const fs::path dir(config.out_dir);
  {
    std::ofstream out = create_or_fail(stage, dir / "statistics.txt");
    for (const GeneratedStatistic& stat : stats)
      out << format_chain(stat.chain, d.schema()) << '\t'
          << format_value(stat.reward) << '\n';
  }
  std::vector<std::string> chains;
  for (const GeneratedStatistic& stat : stats)
    chains.push_back(format_chain(stat.chain, d.schema()));
  const ValuesTable table = evaluate_chains(stage, d, chains);
  save_values(table, (dir / "statistics.values.tsv").string());
  std::cout << stage << ": " << stats.size() << " statistics, "
            << table.labels.size() << " value columns\n";
}

void run_binarize(const RunConfig& config) {
  const std::string stage = "binarize";
  const fs::path dir(config.out_dir);
  const ValuesTable table =
      load_values((dir / "statistics.values.tsv").string());
  const SplitIndices idx =
      config_split(stage, config, std::size_t(table.values.rows()));
  const Eigen::MatrixXd train_values = take_rows(table.values, idx.train);
  ThresholdModel model;
  try {
    model = fit_thresholds(train_values, table.labels);
  } catch (const std::invalid_argument& e) {
    fail(stage, e.what());
  }
  warn_duplicate_literals(transform(train_values, model));
  save_threshold_model(model, config_hash(config),
                       (dir / "thresholds.json").string());
  std::cout << stage << ": " << literal_descriptors(model).size()
            << " literals from " << model.columns.size() << " columns\n";
}

void run_train(const RunConfig& config) {
  const std::string stage = "train";
  const fs::path dir(config.out_dir);
  const ValuesTable table =
      load_values((dir / "statistics.values.tsv").string());
  std::uint64_t artifact_hash = 0;
  const ThresholdModel model =
      load_threshold_model((dir / "thresholds.json").string(), &artifact_hash);
  check_hash(stage, config, artifact_hash, dir / "thresholds.json");

  const Dataset d = load_input(stage, config);
  if (d.size() != std::size_t(table.values.rows()))
    fail(stage, "statistics.values.tsv row count does not match the dataset");
  const SplitIndices idx = config_split(stage, config, d.size());

  const LiteralTable literals = transform(table.values, model);
  const Eigen::MatrixXd train_bits = take_rows(literals.bits, idx.train);
  const Eigen::VectorXd train_teacher = take_values(d.scores(), idx.train);

  const NlnConfig nc = config.nln_config();
  NlnParams params;
  try {
    params = train(train_bits, train_teacher, nc);
  } catch (const std::exception& e) {
    fail(stage, e.what());
  }

  // hard-pass ranking objective on the held-out validation users
  Eigen::VectorXd valid_pred(Eigen::Index(idx.valid.size()));
  for (std::size_t i = 0; i < idx.valid.size(); ++i) {
    const Eigen::VectorXd row =
        literals.bits.row(Eigen::Index(idx.valid[i])).transpose();
    valid_pred[Eigen::Index(i)] = forward_hard(params, augment(row)).prediction;
  }
  const double valid_obj =
      ranking_objective(valid_pred, take_values(d.scores(), idx.valid));

  const std::vector<std::string> chains =
      read_chain_list(stage, dir / "statistics.txt");
  save_checkpoint(params, nc, model, chains, config_hash(config),
                  (dir / "checkpoint.json").string());
  std::cout << stage << ": trained on " << idx.train.size()
            << " users, validation ranking objective "
            << format_value(valid_obj) << "\n";
}

void run_extract(const RunConfig& config) {
  const std::string stage = "extract";
  const fs::path dir(config.out_dir);
  const Checkpoint ckpt = load_checkpoint((dir / "checkpoint.json").string());
  check_hash(stage, config, ckpt.hash, dir / "checkpoint.json");

  RuleSet ruleset;
  try {
    ruleset = extract(ckpt.params, literal_descriptors(ckpt.thresholds));
  } catch (const std::invalid_argument& e) {
    fail(stage, e.what());
  }
  save_rules(ruleset, ckpt.thresholds, ckpt.chains, ckpt.hash,
             (dir / "rules.json").string());
  std::ofstream out = create_or_fail(stage, dir / "rules.txt");
  out << render(ruleset);
  std::size_t literals = 0;
  for (const Rule& rule : ruleset.rules) literals += literal_count(*rule.expr);
  std::cout << stage << ": " << ruleset.rules.size() << " rules, " << literals
            << " literal occurrences\n";
}

void run_evaluate(const RunConfig& config) {
  const std::string stage = "evaluate";
  const fs::path dir(config.out_dir);
  const RulesFile file = load_rules((dir / "rules.json").string());
  check_hash(stage, config, file.hash, dir / "rules.json");

  const Dataset d = load_input(stage, config);
  const ValuesTable table = evaluate_chains(stage, d, file.chains);
  const LiteralTable literals = transform(table.values, file.thresholds);
  const Eigen::VectorXd student = student_scores(file.ruleset, literals.bits);

  const SplitIndices idx = config_split(stage, config, d.size());
  const Eigen::VectorXd teacher_test = take_values(d.scores(), idx.test);
  Eigen::VectorXd student_test(Eigen::Index(idx.test.size()));
  for (std::size_t i = 0; i < idx.test.size(); ++i)
    student_test[Eigen::Index(i)] = student[Eigen::Index(idx.test[i])];

  const double fid = fidelity(teacher_test, student_test);
  // positives are the test users the teacher scores above its median
  std::vector<double> sorted(teacher_test.data(),
                             teacher_test.data() + teacher_test.size());
  const double cutoff = percentile(std::move(sorted), 50.0);
  std::vector<int> labels(idx.test.size());
  for (std::size_t i = 0; i < idx.test.size(); ++i)
    labels[i] = teacher_test[Eigen::Index(i)] > cutoff ? 1 : 0;
  double auc_value = 0.0;
  bool auc_defined = true;
  try {
    auc_value = auc(labels, student_test);
  } catch (const std::invalid_argument&) {
    auc_defined = false;
  }

  std::size_t literal_total = 0;
  for (const Rule& rule : file.ruleset.rules)
    literal_total += literal_count(*rule.expr);

  std::ofstream out = create_or_fail(stage, dir / "evaluation.txt");
  std::ostringstream report;
  report << "test_users: " << idx.test.size() << "\n";
  report << "rules: " << file.ruleset.rules.size() << "\n";
  report << "literal_occurrences: " << literal_total << "\n";
  report << "fidelity: " << format_value(fid) << "\n";
  report << "auc: " << (auc_defined ? format_value(auc_value) : "undefined")
         << "\n";
  out << report.str();
  std::cout << report.str();
}

void run_all(const RunConfig& config) {
  run_gen_stats(config);
  run_binarize(config);
  run_train(config);
  run_extract(config);
  run_evaluate(config);
}

}  // namespace rudi
