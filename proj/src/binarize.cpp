#include "rudi/binarize.hpp"

#include <charconv>
#include <iostream>
#include <map>
#include <stdexcept>

#include "rudi/numerics.hpp"

namespace rudi {

std::string format_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ThresholdModel fit_thresholds(const Eigen::MatrixXd& train_values,
                              const std::vector<std::string>& labels) {
  if (train_values.rows() == 0)
    throw std::invalid_argument("fit_thresholds: empty training split");
  if (labels.size() != std::size_t(train_values.cols()))
    throw std::invalid_argument("fit_thresholds: label count mismatch");

  ThresholdModel model;
  model.labels = labels;
  for (Eigen::Index c = 0; c < train_values.cols(); ++c) {
    ThresholdModel::ColumnRule rule;
    rule.passthrough = true;
    for (Eigen::Index r = 0; r < train_values.rows(); ++r) {
      const double v = train_values(r, c);
      if (v != 0.0 && v != 1.0) {
        rule.passthrough = false;
        break;
      }
    }
    if (!rule.passthrough) {
      std::vector<double> column(train_values.rows());
      for (Eigen::Index r = 0; r < train_values.rows(); ++r)
        column[std::size_t(r)] = train_values(r, c);
      for (int k = 0; k <= 100; k += 10)
        rule.thresholds.push_back(percentile(column, double(k)));
    }
    model.columns.push_back(std::move(rule));
  }
  return model;
}

std::vector<LiteralDescriptor> literal_descriptors(const ThresholdModel& model) {
  std::vector<LiteralDescriptor> descriptors;
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    const auto& rule = model.columns[c];
    if (rule.passthrough) {
      LiteralDescriptor desc;
      desc.source_column = c;
      desc.label = model.labels[c];
      desc.passthrough = true;
      desc.threshold = 0.0;
      desc.render = desc.label + " > 0";
      descriptors.push_back(std::move(desc));
    } else {
      for (double threshold : rule.thresholds) {
        LiteralDescriptor desc;
        desc.source_column = c;
        desc.label = model.labels[c];
        desc.threshold = threshold;
        desc.render = desc.label + " > " + format_value(threshold);
        descriptors.push_back(std::move(desc));
      }
    }
  }
  return descriptors;
}

LiteralTable transform(const Eigen::MatrixXd& values,
                       const ThresholdModel& model) {
  if (std::size_t(values.cols()) != model.columns.size())
    throw std::invalid_argument("transform: column count mismatch");

  LiteralTable table;
  table.descriptors = literal_descriptors(model);
  table.bits.resize(values.rows(), Eigen::Index(table.descriptors.size()));
  for (std::size_t j = 0; j < table.descriptors.size(); ++j) {
    const LiteralDescriptor& desc = table.descriptors[j];
    const Eigen::Index c = Eigen::Index(desc.source_column);
    for (Eigen::Index r = 0; r < values.rows(); ++r)
      table.bits(r, Eigen::Index(j)) =
          values(r, c) > desc.threshold ? 1.0 : 0.0;
  }
  return table;
}

void warn_duplicate_literals(const LiteralTable& table) {
  // duplicate bit patterns are retained for provenance; just flag them
  std::map<std::vector<double>, std::size_t> seen;
  for (std::size_t j = 0; j < table.num_literals(); ++j) {
    std::vector<double> pattern(std::size_t(table.bits.rows()));
    for (Eigen::Index r = 0; r < table.bits.rows(); ++r)
      pattern[std::size_t(r)] = table.bits(r, Eigen::Index(j));
    auto [it, inserted] = seen.emplace(std::move(pattern), j);
    if (!inserted)
      std::cerr << "warning: literal '" << table.descriptors[j].render
                << "' duplicates '" << table.descriptors[it->second].render
                << "' on the training split\n";
  }
}

Eigen::VectorXd augment(const Eigen::VectorXd& literal_row) {
  const Eigen::Index p = literal_row.size();
  Eigen::VectorXd out(2 * p + 2);
  out.head(p) = literal_row;
  out.segment(p, p) = 1.0 - literal_row.array();
  out[2 * p] = 1.0;
  out[2 * p + 1] = 0.0;
  return out;
}

std::pair<std::string, double> parse_literal_render(const std::string& render) {
  const std::size_t sep = render.rfind(" > ");
  if (sep == std::string::npos)
    throw std::invalid_argument("literal render lacks ' > ': " + render);
  const std::string number = render.substr(sep + 3);
  double threshold = 0.0;
  auto res = std::from_chars(number.data(), number.data() + number.size(),
                             threshold);
  if (res.ec != std::errc{} || res.ptr != number.data() + number.size())
    throw std::invalid_argument("bad threshold in literal render: " + render);
  return {render.substr(0, sep), threshold};
}

}  // namespace rudi
