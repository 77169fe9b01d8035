#include "rudi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rudi {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw DatasetError(msg); }

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    fail("cannot parse number '" + text + "' (" + context + ")");
  if (!std::isfinite(value))
    fail("non-finite number '" + text + "' (" + context + ")");
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

std::ifstream open_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path);
  return in;
}

}  // namespace

std::size_t Column::vocab_index(const std::string& value) const {
  auto it = std::find(vocab.begin(), vocab.end(), value);
  if (it == vocab.end())
    fail("value '" + value + "' not in vocab of column '" + name + "'");
  return static_cast<std::size_t>(it - vocab.begin());
}

Schema::Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) fail("schema has no columns");
  std::set<std::string> names;
  for (const Column& col : columns_) {
    if (col.name.empty()) fail("schema column with empty name");
    if (!names.insert(col.name).second)
      fail("duplicate column name '" + col.name + "'");
    if (col.kind == ColumnKind::Categorical) {
      if (col.vocab.empty())
        fail("categorical column '" + col.name + "' has empty vocab");
      std::set<std::string> seen(col.vocab.begin(), col.vocab.end());
      if (seen.size() != col.vocab.size())
        fail("duplicate vocab entry in column '" + col.name + "'");
    } else if (!col.vocab.empty()) {
      fail("numerical column '" + col.name + "' must not declare a vocab");
    }
  }
}

std::optional<std::size_t> Schema::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

std::vector<std::size_t> Schema::categorical_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].kind == ColumnKind::Categorical) out.push_back(i);
  return out;
}

std::vector<std::size_t> Schema::numerical_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].kind == ColumnKind::Numerical) out.push_back(i);
  return out;
}

bool Schema::operator==(const Schema& other) const {
  if (columns_.size() != other.columns_.size()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const Column& a = columns_[i];
    const Column& b = other.columns_[i];
    if (a.name != b.name || a.kind != b.kind || a.vocab != b.vocab)
      return false;
  }
  return true;
}

Dataset::Dataset(Schema schema, std::vector<EventSequence> sequences,
                 std::vector<double> teacher_scores)
    : schema_(std::move(schema)),
      sequences_(std::move(sequences)),
      scores_(std::move(teacher_scores)) {
  if (sequences_.size() < 2) fail("dataset needs at least 2 sequences");
  if (scores_.size() != sequences_.size())
    fail("scores/sequences size mismatch");
  std::set<std::string> users;
  for (const EventSequence& seq : sequences_) {
    if (seq.rows.empty()) fail("empty sequence for user '" + seq.user_id + "'");
    if (!users.insert(seq.user_id).second)
      fail("duplicate user_id '" + seq.user_id + "'");
  }
  for (double s : scores_)
    if (!std::isfinite(s)) fail("non-finite teacher score");
}

Schema load_schema(const std::string& schema_path) {
  std::ifstream in = open_or_fail(schema_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail("schema parse error in " + schema_path + ": " + e.what());
  }
  if (!doc.contains("columns") || !doc["columns"].is_array())
    fail("schema file missing 'columns' array: " + schema_path);
  std::vector<Column> columns;
  for (const auto& entry : doc["columns"]) {
    Column col;
    col.name = entry.at("name").get<std::string>();
    const std::string kind = entry.at("kind").get<std::string>();
    if (kind == "categorical") {
      col.kind = ColumnKind::Categorical;
      col.vocab = entry.at("vocab").get<std::vector<std::string>>();
    } else if (kind == "numerical") {
      col.kind = ColumnKind::Numerical;
    } else {
      fail("unknown column kind '" + kind + "' in " + schema_path);
    }
    columns.push_back(std::move(col));
  }
  return Schema(std::move(columns));
}

Dataset load_dataset(const std::string& events_path,
                     const std::string& schema_path,
                     const std::string& scores_path) {
  Schema schema = load_schema(schema_path);

  std::unordered_map<std::string, double> score_by_user;
  {
    std::ifstream in = open_or_fail(scores_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string user, score_text;
      if (!(ss >> user >> score_text))
        fail("scores line " + std::to_string(lineno) + ": expected 'user score'");
      const double score = parse_double(
          score_text, scores_path + " line " + std::to_string(lineno));
      if (!score_by_user.emplace(user, score).second)
        fail("duplicate score for user '" + user + "'");
    }
  }

  std::ifstream in = open_or_fail(events_path);
  std::string line;
  if (!std::getline(in, line)) fail("events file is empty: " + events_path);
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "user_id")
    fail("events header must start with 'user_id'");
  // column_of[i] maps header field i+1 to a schema column
  std::vector<std::size_t> column_of;
  for (std::size_t i = 1; i < header.size(); ++i) {
    auto idx = schema.find(header[i]);
    if (!idx) fail("unknown column '" + header[i] + "' in events header");
    column_of.push_back(*idx);
  }
  if (column_of.size() != schema.size())
    fail("events header must name every schema column");

  std::vector<EventSequence> sequences;
  std::unordered_map<std::string, std::size_t> seq_of_user;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail("events row " + std::to_string(lineno) + ": expected " +
           std::to_string(header.size()) + " fields, got " +
           std::to_string(fields.size()));
    const std::string& user = fields[0];
    std::vector<CellValue> row(schema.size());
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::size_t col_idx = column_of[i - 1];
      const Column& col = schema.column(col_idx);
      CellValue cell;
      if (col.kind == ColumnKind::Categorical) {
        auto it = std::find(col.vocab.begin(), col.vocab.end(), fields[i]);
        if (it == col.vocab.end())
          fail("events row " + std::to_string(lineno) + ": value '" +
               fields[i] + "' not in vocab of column '" + col.name + "'");
        cell.category = static_cast<std::size_t>(it - col.vocab.begin());
      } else {
        cell.number = parse_double(
            fields[i], "events row " + std::to_string(lineno) + ", column '" +
                           col.name + "'");
      }
      row[col_idx] = cell;
    }
    auto it = seq_of_user.find(user);
    if (it == seq_of_user.end()) {
      if (!score_by_user.count(user))
        fail("missing score for user '" + user + "' (first seen at events row " +
             std::to_string(lineno) + ")");
      seq_of_user.emplace(user, sequences.size());
      sequences.push_back(EventSequence{user, {}});
      it = seq_of_user.find(user);
    }
    sequences[it->second].rows.push_back(std::move(row));
  }

  std::vector<double> scores;
  scores.reserve(sequences.size());
  for (const EventSequence& seq : sequences)
    scores.push_back(score_by_user.at(seq.user_id));
  return Dataset(std::move(schema), std::move(sequences), std::move(scores));
}

void save_dataset(const Dataset& d, const std::string& events_path,
                  const std::string& schema_path,
                  const std::string& scores_path) {
  {
    nlohmann::json doc;
    doc["columns"] = nlohmann::json::array();
    for (const Column& col : d.schema().columns()) {
      nlohmann::json entry;
      entry["name"] = col.name;
      entry["kind"] =
          col.kind == ColumnKind::Categorical ? "categorical" : "numerical";
      if (col.kind == ColumnKind::Categorical) entry["vocab"] = col.vocab;
      doc["columns"].push_back(entry);
    }
    std::ofstream out(schema_path);
    if (!out) fail("cannot write " + schema_path);
    out << doc.dump(2) << "\n";
  }
  {
    std::ofstream out(events_path);
    if (!out) fail("cannot write " + events_path);
    out << "user_id";
    for (const Column& col : d.schema().columns()) out << "," << col.name;
    out << "\n";
    for (const EventSequence& seq : d.sequences()) {
      for (const auto& row : seq.rows) {
        out << seq.user_id;
        for (std::size_t c = 0; c < d.schema().size(); ++c) {
          const Column& col = d.schema().column(c);
          out << ",";
          if (col.kind == ColumnKind::Categorical)
            out << col.vocab[row[c].category];
          else
            out << format_double(row[c].number);
        }
        out << "\n";
      }
    }
  }
  {
    std::ofstream out(scores_path);
    if (!out) fail("cannot write " + scores_path);
    for (std::size_t i = 0; i < d.size(); ++i)
      out << d.sequence(i).user_id << "\t" << format_double(d.scores()[i])
          << "\n";
  }
}

SplitIndices split_indices(std::size_t n, double train_frac,
                           std::size_t valid_count, std::uint64_t seed) {
  if (train_frac < 0.0 || train_frac > 1.0)
    fail("train_frac must be in [0, 1]");
  const std::size_t train_pool =
      static_cast<std::size_t>(std::llround(train_frac * double(n)));
  if (valid_count >= train_pool)
    fail("valid_count must be smaller than the training pool");
  const std::size_t n_train = train_pool - valid_count;
  if (n_train < 2 || valid_count < 2 || n - train_pool < 2)
    fail("split produces a part with fewer than 2 sequences");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  SplitIndices idx;
  idx.train.assign(order.begin(), order.begin() + n_train);
  idx.valid.assign(order.begin() + n_train, order.begin() + train_pool);
  idx.test.assign(order.begin() + train_pool, order.end());
  return idx;
}

SplitResult split(const Dataset& d, double train_frac, std::size_t valid_count,
                  std::uint64_t seed) {
  const SplitIndices idx =
      split_indices(d.size(), train_frac, valid_count, seed);
  auto part = [&](const std::vector<std::size_t>& members) {
    std::vector<EventSequence> seqs;
    std::vector<double> scores;
    for (std::size_t i : members) {
      seqs.push_back(d.sequence(i));
      scores.push_back(d.scores()[i]);
    }
    return Dataset(d.schema(), std::move(seqs), std::move(scores));
  };
  return SplitResult{part(idx.train), part(idx.valid), part(idx.test)};
}

std::vector<std::size_t> sample_batch(const Dataset& d, std::size_t batch_size,
                                      Rng& rng) {
  const std::size_t n = d.size();
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (batch_size >= n) return indices;
  // partial Fisher-Yates: the first batch_size slots are the sample
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(batch_size);
  std::sort(indices.begin(), indices.end());
  return indices;
}

}  // namespace rudi
