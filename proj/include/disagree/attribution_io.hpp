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

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/data.hpp"
#include "disagree/explainers.hpp"

namespace disagree {

// Shortest text that parses back to the same double.
inline std::string FormatReal(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline nlohmann::json AttributionToJson(const Attribution& a) {
  return {{"method", std::string(MethodId(a.method))},
          {"instance_index", a.instance_index},
          {"target_class", a.target_class},
          {"values", std::vector<double>(a.values.begin(), a.values.end())}};
}

inline Attribution AttributionFromJson(const nlohmann::json& j) {
  try {
    Attribution a;
    a.method = MethodFromId(j.at("method").get<std::string>());
    a.instance_index = j.at("instance_index").get<std::size_t>();
    a.target_class = j.at("target_class").get<int>();
    auto values = j.at("values").get<std::vector<double>>();
    a.values = Eigen::Map<Vector>(values.data(), values.size());
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("bad attribution: ") + e.what());
  }
}

// One method's attributions for a list of instances, as stored in the wide
// CSV layout: instance_index,target_class,v_0,...,v_{d-1}.
struct AttributionTable {
  std::vector<std::size_t> instance_index;
  std::vector<int> target_class;
  std::vector<Vector> values;

  std::size_t size() const { return values.size(); }
};

inline void WriteAttributionCsv(std::ostream& out,
                                const std::vector<Attribution>& rows,
                                std::size_t d) {
  out << "instance_index,target_class";
  for (std::size_t i = 0; i < d; ++i) out << ",v_" << i;
  out << '\n';
  for (const auto& a : rows) {
    detail::Require(a.d() == d, ErrorKind::kDimensionMismatch,
                    "attribution length does not match d");
    out << a.instance_index << ',' << a.target_class;
    for (double v : a.values) out << ',' << FormatReal(v);
    out << '\n';
  }
}

inline void WriteAttributionCsv(const std::string& path,
                                const std::vector<Attribution>& rows,
                                std::size_t d) {
  std::ofstream out(path, std::ios::binary);
  detail::Require(out.good(), ErrorKind::kIo, "cannot write " + path);
  WriteAttributionCsv(out, rows, d);
}

inline AttributionTable ReadAttributionCsv(const std::string& path) {
  std::ifstream in(path);
  detail::Require(in.good(), ErrorKind::kIo, "cannot open " + path);
  std::string line;
  detail::Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kParse,
                  path + ": empty attribution file");
  const auto header = detail::SplitCsvLine(line);
  detail::Require(header.size() >= 3 && header[0] == "instance_index" &&
                      header[1] == "target_class",
                  ErrorKind::kParse,
                  path + ": header must start with instance_index,target_class");
  const std::size_t d = header.size() - 2;
  for (std::size_t i = 0; i < d; ++i) {
    detail::Require(header[i + 2] == "v_" + std::to_string(i),
                    ErrorKind::kParse,
                    path + ": unexpected column '" + header[i + 2] + "'");
  }
  AttributionTable table;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = detail::SplitCsvLine(line);
    detail::Require(cells.size() == d + 2, ErrorKind::kParse,
                    path + ": row " + std::to_string(row) +
                        " has the wrong number of cells");
    double idx, cls;
    detail::Require(detail::ParseReal(cells[0], idx) && idx >= 0 &&
                        idx == std::floor(idx) &&
                        detail::ParseReal(cells[1], cls) &&
                        (cls == 0 || cls == 1),
                    ErrorKind::kParse,
                    path + ": row " + std::to_string(row) +
                        " has a bad instance_index or target_class");
    Vector v(d);
    for (std::size_t i = 0; i < d; ++i) {
      detail::Require(detail::ParseReal(cells[i + 2], v[i]), ErrorKind::kParse,
                      path + ": row " + std::to_string(row) + " column v_" +
                          std::to_string(i) + " is not a finite number");
    }
    table.instance_index.push_back(static_cast<std::size_t>(idx));
    table.target_class.push_back(static_cast<int>(cls));
    table.values.push_back(std::move(v));
  }
  return table;
}

}  // namespace disagree
