#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rudi/rng.hpp"

namespace rudi {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { Categorical, Numerical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numerical;
  std::vector<std::string> vocab;  // non-empty iff categorical

  std::size_t vocab_index(const std::string& value) const;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns);

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t idx) const { return columns_.at(idx); }
  std::size_t size() const { return columns_.size(); }
  // Returns the index of `name`, or nullopt if unknown.
  std::optional<std::size_t> find(const std::string& name) const;

  std::vector<std::size_t> categorical_columns() const;
  std::vector<std::size_t> numerical_columns() const;

  bool operator==(const Schema& other) const;

 private:
  std::vector<Column> columns_;
};

// One cell of an event row: vocab index for categorical columns, raw value
// for numerical ones.
union CellValue {
  std::size_t category;
  double number;
};

struct EventSequence {
  std::string user_id;
  // rows[r][c] is the value of column c in the r-th event, in file order.
  std::vector<std::vector<CellValue>> rows;

  std::size_t length() const { return rows.size(); }
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, std::vector<EventSequence> sequences,
          std::vector<double> teacher_scores);

  const Schema& schema() const { return schema_; }
  const std::vector<EventSequence>& sequences() const { return sequences_; }
  const EventSequence& sequence(std::size_t i) const { return sequences_.at(i); }
  const std::vector<double>& scores() const { return scores_; }
  std::size_t size() const { return sequences_.size(); }

 private:
  Schema schema_;
  std::vector<EventSequence> sequences_;
  std::vector<double> scores_;
};

// File formats (documented in the README):
//   schema: JSON object {"columns": [{"name", "kind", "vocab"?}, ...]}
//   events: CSV, header "user_id,<col>,..."; sequences grouped by user_id
//           preserving file order; UTF-8, "." decimal separator
//   scores: one "user_id<whitespace>score" pair per line, '#' comments
Schema load_schema(const std::string& schema_path);
Dataset load_dataset(const std::string& events_path,
                     const std::string& schema_path,
                     const std::string& scores_path);
void save_dataset(const Dataset& d, const std::string& events_path,
                  const std::string& schema_path,
                  const std::string& scores_path);

struct SplitResult {
  Dataset train;
  Dataset valid;
  Dataset test;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// Index-level split used by pipeline stages that need row positions into the
// full dataset; split() is defined in terms of it.
SplitIndices split_indices(std::size_t n, double train_frac,
                           std::size_t valid_count, std::uint64_t seed);

// Deterministic shuffle split: round(train_frac*N) users go to the train
// pool, of which `valid_count` become the validation set; the rest is test.
SplitResult split(const Dataset& d, double train_frac, std::size_t valid_count,
                  std::uint64_t seed);

// min(B, N) distinct indices, uniform without replacement, ascending order.
std::vector<std::size_t> sample_batch(const Dataset& d, std::size_t batch_size,
                                      Rng& rng);

}  // namespace rudi
