#pragma once

// Small builders shared by the test files.

#include <string>
#include <vector>

#include "rudi/dataset.hpp"
#include "rudi/operators.hpp"
#include "rudi/rng.hpp"

namespace testutil {

// cardtype {debit, credit} + money, the running example schema.
inline rudi::Schema card_schema() {
  return rudi::Schema({
      {"cardtype", rudi::ColumnKind::Categorical, {"debit", "credit"}},
      {"money", rudi::ColumnKind::Numerical, {}},
  });
}

// type {A,B,C} + channel {web,app} + amount + latency, the fixture schema.
inline rudi::Schema fixture_schema() {
  return rudi::Schema({
      {"type", rudi::ColumnKind::Categorical, {"A", "B", "C"}},
      {"channel", rudi::ColumnKind::Categorical, {"web", "app"}},
      {"amount", rudi::ColumnKind::Numerical, {}},
      {"latency", rudi::ColumnKind::Numerical, {}},
  });
}

inline rudi::CellValue cat(std::size_t index) {
  rudi::CellValue v;
  v.category = index;
  return v;
}

inline rudi::CellValue num(double value) {
  rudi::CellValue v;
  v.number = value;
  return v;
}

// Rows of (cardtype index, money) pairs.
inline rudi::EventSequence card_seq(
    const std::string& user,
    const std::vector<std::pair<std::size_t, double>>& rows) {
  rudi::EventSequence seq;
  seq.user_id = user;
  for (const auto& [c, m] : rows) seq.rows.push_back({cat(c), num(m)});
  return seq;
}

inline rudi::EventSequence random_seq(const rudi::Schema& schema,
                                      const std::string& user,
                                      std::size_t max_rows, rudi::Rng& rng) {
  rudi::EventSequence seq;
  seq.user_id = user;
  const std::size_t n = 1 + std::size_t(rng.below(max_rows));
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<rudi::CellValue> row;
    for (const rudi::Column& col : schema.columns()) {
      if (col.kind == rudi::ColumnKind::Categorical)
        row.push_back(cat(std::size_t(rng.below(col.vocab.size()))));
      else
        row.push_back(num(rng.normal() * 10.0));
    }
    seq.rows.push_back(std::move(row));
  }
  return seq;
}

inline rudi::Dataset random_dataset(const rudi::Schema& schema, std::size_t n,
                                    std::size_t max_rows, rudi::Rng& rng) {
  std::vector<rudi::EventSequence> seqs;
  std::vector<double> scores;
  for (std::size_t i = 0; i < n; ++i) {
    seqs.push_back(random_seq(schema, "u" + std::to_string(i), max_rows, rng));
    scores.push_back(rng.normal());
  }
  return rudi::Dataset(schema, std::move(seqs), std::move(scores));
}

}  // namespace testutil
