/*
 * Copyright 2026 The disagree Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Tabular datasets: CSV ingestion, train/test splitting and standardization.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/common.hpp"

namespace disagree {

struct FeatureSchema {
  std::vector<std::string> names;
  std::string label_name;

  std::size_t d() const { return names.size(); }

  void Validate() const {
    detail::Require(!names.empty(), ErrorKind::kInvalidArgument,
                    "schema has no features");
    std::set<std::string> seen;
    for (const auto& name : names) {
      detail::Require(!name.empty(), ErrorKind::kInvalidArgument,
                      "schema has an empty feature name");
      detail::Require(seen.insert(name).second, ErrorKind::kInvalidArgument,
                      "duplicate feature name '" + name + "'");
    }
    detail::Require(!label_name.empty(), ErrorKind::kInvalidArgument,
                    "schema has an empty label name");
    detail::Require(!seen.contains(label_name), ErrorKind::kInvalidArgument,
                    "label '" + label_name + "' is also a feature");
  }

  bool operator==(const FeatureSchema&) const = default;
};

inline nlohmann::json SchemaToJson(const FeatureSchema& schema) {
  return {{"features", schema.names}, {"label", schema.label_name}};
}

inline FeatureSchema SchemaFromJson(const nlohmann::json& j) {
  FeatureSchema schema;
  try {
    schema.names = j.at("features").get<std::vector<std::string>>();
    schema.label_name = j.at("label").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("bad schema: ") + e.what());
  }
  schema.Validate();
  return schema;
}

inline FeatureSchema LoadSchema(const std::string& path) {
  std::ifstream in(path);
  detail::Require(in.good(), ErrorKind::kIo, "cannot open schema " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  return SchemaFromJson(j);
}

struct Dataset {
  FeatureSchema schema;
  Matrix X;            // n x d
  std::vector<int> y;  // n labels in {0, 1}

  std::size_t n() const { return y.size(); }
  std::size_t d() const { return schema.d(); }

  void Validate() const {
    schema.Validate();
    detail::Require(n() >= 1, ErrorKind::kInvalidArgument, "dataset is empty");
    detail::Require(static_cast<std::size_t>(X.rows()) == n() &&
                        static_cast<std::size_t>(X.cols()) == d(),
                    ErrorKind::kDimensionMismatch,
                    "feature matrix shape does not match labels/schema");
    detail::Require(X.allFinite(), ErrorKind::kInvalidArgument,
                    "feature matrix has non-finite values");
    for (int label : y) {
      detail::Require(label == 0 || label == 1, ErrorKind::kInvalidArgument,
                      "labels must be 0 or 1");
    }
  }

  // Rows in the given order.
  Dataset Subset(const std::vector<std::size_t>& rows) const {
    Dataset out{schema, Matrix(rows.size(), d()), {}};
    out.y.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.X.row(i) = X.row(rows[i]);
      out.y.push_back(y[rows[i]]);
    }
    return out;
  }
};

namespace detail {

inline std::vector<std::string> SplitCsvLine(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    auto first = c.find_first_not_of(" \t");
    auto last = c.find_last_not_of(" \t");
    c = first == std::string::npos ? "" : c.substr(first, last - first + 1);
  }
  return cells;
}

inline bool ParseReal(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  std::istringstream ss(cell);
  ss.imbue(std::locale::classic());
  ss >> out;
  return !ss.fail() && ss.eof() && std::isfinite(out);
}

}  // namespace detail

// Reads a header + numeric rows CSV. The header must be the schema's feature
// names followed by its label column. Data rows are 1-based in messages,
// counting the header as row 0.
inline Dataset LoadCsv(const std::string& path, const FeatureSchema& schema) {
  schema.Validate();
  std::ifstream in(path);
  detail::Require(in.good(), ErrorKind::kIo, "cannot open dataset " + path);

  std::string line;
  detail::Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kParse,
                  path + ": missing header row");
  std::vector<std::string> expected = schema.names;
  expected.push_back(schema.label_name);
  if (detail::SplitCsvLine(line) != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw Error(ErrorKind::kParse,
                path + ": header mismatch, expected '" + want + "'");
  }

  const std::size_t d = schema.d();
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto cells = detail::SplitCsvLine(line);
    if (cells.size() != d + 1) {
      throw Error(ErrorKind::kParse,
                  path + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(d + 1));
    }
    for (std::size_t c = 0; c < d; ++c) {
      double v;
      if (!detail::ParseReal(cells[c], v)) {
        throw Error(ErrorKind::kParse,
                    path + ": row " + std::to_string(row) + " column '" +
                        schema.names[c] + "' is not a finite number: '" +
                        cells[c] + "'");
      }
      values.push_back(v);
    }
    double label;
    if (!detail::ParseReal(cells[d], label) || (label != 0.0 && label != 1.0)) {
      throw Error(ErrorKind::kParse,
                  path + ": row " + std::to_string(row) + " label '" +
                      cells[d] + "' is not 0 or 1");
    }
    labels.push_back(static_cast<int>(label));
  }
  detail::Require(!labels.empty(), ErrorKind::kParse, path + ": no data rows");

  Dataset ds{schema, Matrix(labels.size(), d), std::move(labels)};
  for (std::size_t r = 0; r < ds.n(); ++r) {
    for (std::size_t c = 0; c < d; ++c) ds.X(r, c) = values[r * d + c];
  }
  return ds;
}

// Test split size is ceil(n * test_fraction); the training split takes the
// remaining floor(n * (1 - test_fraction)) rows.
inline std::size_t TestSplitSize(std::size_t n, double test_fraction) {
  return static_cast<std::size_t>(
      std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
}

// Returns (train, test). Both keep the shuffled order.
inline std::pair<Dataset, Dataset> TrainTestSplit(const Dataset& ds,
                                                  double test_fraction,
                                                  std::uint64_t seed) {
  detail::Require(test_fraction > 0.0 && test_fraction < 1.0,
                  ErrorKind::kInvalidArgument,
                  "test fraction must lie in (0, 1)");
  detail::Require(ds.n() >= 2, ErrorKind::kInvalidArgument,
                  "need at least 2 rows to split");
  const std::size_t n_test = TestSplitSize(ds.n(), test_fraction);
  detail::Require(n_test >= 1 && n_test < ds.n(), ErrorKind::kInvalidArgument,
                  "split would leave an empty partition");

  std::vector<std::size_t> order(ds.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_train = ds.n() - n_test;
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_rows(order.begin() + n_train, order.end());
  return {ds.Subset(train_rows), ds.Subset(test_rows)};
}

// Per-column affine map to zero mean and unit population variance.
struct Standardizer {
  Vector means;
  Vector stds;  // zero-variance columns store 1

  std::size_t d() const { return static_cast<std::size_t>(means.size()); }

  Matrix Apply(const Matrix& X) const {
    CheckColumns(X);
    return (X.rowwise() - means.transpose()).array().rowwise() /
           stds.transpose().array();
  }

  Matrix Invert(const Matrix& Z) const {
    CheckColumns(Z);
    return (Z.array().rowwise() * stds.transpose().array()).matrix()
               .rowwise() + means.transpose();
  }

  Dataset Apply(const Dataset& ds) const {
    return Dataset{ds.schema, Apply(ds.X), ds.y};
  }

 private:
  void CheckColumns(const Matrix& X) const {
    detail::Require(static_cast<std::size_t>(X.cols()) == d(),
                    ErrorKind::kDimensionMismatch,
                    "standardizer fitted on " + std::to_string(d()) +
                        " columns, got " + std::to_string(X.cols()));
  }
};

inline Standardizer FitStandardizer(const Dataset& ds) {
  detail::Require(ds.n() >= 1, ErrorKind::kInvalidArgument, "dataset is empty");
  const double n = static_cast<double>(ds.n());
  Standardizer s;
  s.means = ds.X.colwise().mean().transpose();
  s.stds = ((ds.X.rowwise() - s.means.transpose()).array().square()
                .colwise().sum() / n)
               .sqrt()
               .transpose();
  for (Eigen::Index j = 0; j < s.stds.size(); ++j) {
    if (s.stds[j] == 0.0) s.stds[j] = 1.0;
  }
  return s;
}

inline nlohmann::json StandardizerToJson(const Standardizer& s) {
  return {{"means", std::vector<double>(s.means.begin(), s.means.end())},
          {"stds", std::vector<double>(s.stds.begin(), s.stds.end())}};
}

inline Standardizer StandardizerFromJson(const nlohmann::json& j) {
  auto means = j.at("means").get<std::vector<double>>();
  auto stds = j.at("stds").get<std::vector<double>>();
  detail::Require(means.size() == stds.size(), ErrorKind::kParse,
                  "standardizer means/stds length mismatch");
  Standardizer s;
  s.means = Eigen::Map<Vector>(means.data(), means.size());
  s.stds = Eigen::Map<Vector>(stds.data(), stds.size());
  return s;
}

}  // namespace disagree
