#include "rudi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "rudi/numerics.hpp"
#include "rudi/operators.hpp"
#include "rudi/rng.hpp"

namespace rudi {

namespace {

Schema fixture_schema() {
  std::vector<Column> cols;
  cols.push_back({"type", ColumnKind::Categorical, {"A", "B", "C"}});
  cols.push_back({"channel", ColumnKind::Categorical, {"web", "app"}});
  cols.push_back({"amount", ColumnKind::Numerical, {}});
  cols.push_back({"latency", ColumnKind::Numerical, {}});
  return Schema(std::move(cols));
}

std::vector<EventSequence> draw_sequences(const Schema& schema,
                                          std::size_t users, Rng& rng) {
  std::vector<EventSequence> seqs;
  seqs.reserve(users);
  for (std::size_t u = 0; u < users; ++u) {
    EventSequence seq;
    seq.user_id = "u" + std::to_string(u);
    const std::size_t len = 3 + std::size_t(rng.below(28));
    for (std::size_t r = 0; r < len; ++r) {
      std::vector<CellValue> row(schema.size());
      row[0].category = std::size_t(rng.below(3));
      row[1].category = std::size_t(rng.below(2));
      row[2].number = rng.normal();
      row[3].number = 50.0 + 10.0 * rng.normal();
      seq.rows.push_back(std::move(row));
    }
    seqs.push_back(std::move(seq));
  }
  return seqs;
}

Eigen::VectorXd chain_values(const std::string& text, const Schema& schema,
                             const std::vector<EventSequence>& seqs) {
  const StatisticChain chain = parse_chain(text, schema);
  Eigen::VectorXd out(Eigen::Index(seqs.size()));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    out[Eigen::Index(i)] = evaluate(chain, schema, seqs[i])[0];
  return out;
}

Eigen::VectorXd standardize(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  if (sd == 0.0)
    throw std::runtime_error("synthetic: degenerate constant signal");
  return (v.array() - mean) / sd;
}

double population_std(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().mean());
}

double median_floor(const Eigen::VectorXd& v) {
  std::vector<double> vals(v.data(), v.data() + v.size());
  return std::floor(percentile(vals, 50.0));
}

void check_varies(const Eigen::VectorXd& indicator, const std::string& what) {
  const double frac = indicator.mean();
  if (frac < 0.05 || frac > 0.95)
    throw std::runtime_error("synthetic: rule '" + what +
                             "' is nearly constant (fires on " +
                             std::to_string(frac) + " of users)");
}

}  // namespace

Dataset make_synthetic(const std::string& name, std::size_t users,
                       std::uint64_t seed, nlohmann::json& manifest) {
  if (users < 10)
    throw std::invalid_argument("make_synthetic: need at least 10 users");
  const Schema schema = fixture_schema();
  Rng rng(seed);
  std::vector<EventSequence> seqs = draw_sequences(schema, users, rng);
  const Eigen::Index n = Eigen::Index(users);

  manifest = nlohmann::json::object();
  manifest["fixture"] = name;
  manifest["users"] = users;
  manifest["seed"] = seed;

  std::vector<double> scores(users);
  if (name == "single-signal") {
    const std::string chain = "Sum o RetainBy[type=A] o Select[amount]";
    const Eigen::VectorXd signal = chain_values(chain, schema, seqs);
    const double sigma = 0.01 * population_std(signal);
    for (std::size_t i = 0; i < users; ++i)
      scores[i] = signal[Eigen::Index(i)] + sigma * rng.normal();
    manifest["signal_chain"] = chain;
    manifest["noise_sigma"] = sigma;
  } else if (name == "two-signal") {
    const std::string c1 = "Sum o RetainBy[type=A] o Select[amount]";
    const std::string c2 = "Mean o Select[latency]";
    const Eigen::VectorXd s1 = standardize(chain_values(c1, schema, seqs));
    const Eigen::VectorXd s2 = standardize(chain_values(c2, schema, seqs));
    const double corr = pearson_corr(s1, s2);
    if (std::abs(corr) >= 0.1)
      throw std::runtime_error("synthetic: fixture signals are correlated");
    const Eigen::VectorXd y = s1 + s2;
    const double sigma = 0.01 * population_std(y);
    for (std::size_t i = 0; i < users; ++i)
      scores[i] = y[Eigen::Index(i)] + sigma * rng.normal();
    manifest["signal_chains"] = {c1, c2};
    manifest["signal_correlation"] = corr;
    manifest["noise_sigma"] = sigma;
  } else if (name == "rule-teacher") {
    const std::string ca = "Count o RetainBy[type=A] o Select[amount]";
    const std::string cb = "Count o RetainBy[type=B] o Select[amount]";
    const std::string cw = "Count o RetainBy[channel=web] o Select[amount]";
    const std::string cl = "Count o Select[amount]";
    const Eigen::VectorXd cnt_a = chain_values(ca, schema, seqs);
    const Eigen::VectorXd cnt_b = chain_values(cb, schema, seqs);
    const Eigen::VectorXd cnt_w = chain_values(cw, schema, seqs);
    const Eigen::VectorXd len = chain_values(cl, schema, seqs);
    const double t1 = median_floor(cnt_a);
    const double t2 = median_floor(len);
    const double t3 = median_floor(cnt_b);
    const double t4 = median_floor(cnt_w);
    Eigen::VectorXd r1(n), r2(n), r3(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      r1[i] = cnt_a[i] > t1 ? 1.0 : 0.0;
      r2[i] = (len[i] > t2 && !(cnt_b[i] > t3)) ? 1.0 : 0.0;
      r3[i] = cnt_w[i] > t4 ? 1.0 : 0.0;
    }
    check_varies(r1, "r1");
    check_varies(r2, "r2");
    check_varies(r3, "r3");
    for (std::size_t i = 0; i < users; ++i) {
      const Eigen::Index k = Eigen::Index(i);
      scores[i] = 1.0 * r1[k] + 0.6 * r2[k] - 0.8 * r3[k];
    }
    manifest["rules"] = nlohmann::json::array(
        {{{"weight", 1.0}, {"chain", ca}, {"threshold", t1}},
         {{"weight", 0.6},
          {"chain", cl},
          {"threshold", t2},
          {"and_not_chain", cb},
          {"and_not_threshold", t3}},
         {{"weight", -0.8}, {"chain", cw}, {"threshold", t4}}});
  } else {
    throw std::invalid_argument("make_synthetic: unknown fixture '" + name +
                                "'");
  }

  return Dataset(schema, std::move(seqs), std::move(scores));
}

void write_synthetic(const std::string& name, std::size_t users,
                     std::uint64_t seed, const std::string& out_dir) {
  nlohmann::json manifest;
  const Dataset d = make_synthetic(name, users, seed, manifest);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  save_dataset(d, (dir / "events.csv").string(), (dir / "schema.json").string(),
               (dir / "scores.tsv").string());
  std::ofstream out(dir / "manifest.json");
  if (!out)
    throw std::runtime_error("write_synthetic: cannot write manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace rudi
