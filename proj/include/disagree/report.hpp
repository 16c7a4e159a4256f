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

// Report emitters: the pairwise report CSV, matrices JSON, per-instance
// records CSV, and SVG heatmaps.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/attribution_io.hpp"
#include "disagree/harness.hpp"

namespace disagree {

struct ReportRow {
  std::string method_a;  // method_a <= method_b
  std::string method_b;
  std::string metric;
  std::string k;  // k, or the feature subset descriptor
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

namespace detail {

// Numeric scopes sort numerically and before non-numeric ones.
inline bool ScopeLess(const std::string& x, const std::string& y) {
  auto numeric = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(),
                                     [](char c) { return c >= '0' && c <= '9'; });
  };
  const bool nx = numeric(x), ny = numeric(y);
  if (nx != ny) return nx;
  if (nx && x.size() != y.size()) return x.size() < y.size();
  return x < y;
}

inline std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace detail

// One row per off-diagonal method pair of every matrix, sorted by
// (metric, k, method_a, method_b).
inline std::vector<ReportRow> BuildReportRows(
    const std::vector<PairwiseMatrix>& matrices) {
  std::vector<ReportRow> rows;
  for (const auto& m : matrices) {
    for (std::size_t a = 0; a < m.methods.size(); ++a) {
      for (std::size_t b = a + 1; b < m.methods.size(); ++b) {
        ReportRow r{m.methods[a], m.methods[b], std::string(MetricName(m.metric)),
                    m.Scope(), m.mean(a, b), m.std_error(a, b), m.n};
        if (r.method_b < r.method_a) std::swap(r.method_a, r.method_b);
        rows.push_back(std::move(r));
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& x, const ReportRow& y) {
                     if (x.metric != y.metric) return x.metric < y.metric;
                     if (x.k != y.k) return detail::ScopeLess(x.k, y.k);
                     return std::tie(x.method_a, x.method_b) <
                            std::tie(y.method_a, y.method_b);
                   });
  return rows;
}

inline void WriteReportCsv(std::ostream& out,
                           const std::vector<ReportRow>& rows) {
  out << "method_a,method_b,metric,k,mean,stderr,n\n";
  for (const auto& r : rows) {
    out << r.method_a << ',' << r.method_b << ',' << r.metric << ',' << r.k
        << ',' << FormatReal(r.mean) << ',' << FormatReal(r.std_error) << ','
        << r.n << '\n';
  }
}

inline nlohmann::json MatrixToJson(const PairwiseMatrix& m) {
  auto rows = [](const Matrix& x) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      std::vector<double> row(x.cols());
      for (Eigen::Index c = 0; c < x.cols(); ++c) row[c] = x(r, c);
      out.push_back(row);
    }
    return out;
  };
  nlohmann::json j;
  j["metric"] = std::string(MetricName(m.metric));
  j["k"] = m.k ? nlohmann::json(*m.k) : nlohmann::json(m.subset);
  j["methods"] = m.methods;
  j["mean"] = rows(m.mean);
  j["stderr"] = rows(m.std_error);
  j["n"] = m.n;
  return j;
}

inline nlohmann::json MatricesToJson(const std::vector<PairwiseMatrix>& ms) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : ms) out.push_back(MatrixToJson(m));
  return out;
}

inline PairwiseMatrix MatrixFromJson(const nlohmann::json& j) {
  try {
    PairwiseMatrix m;
    m.metric = MetricFromName(j.at("metric").get<std::string>());
    const auto& k = j.at("k");
    if (k.is_number_unsigned()) {
      m.k = k.get<std::size_t>();
    } else {
      m.subset = k.get<std::string>();
    }
    detail::Require(IsTopKMetric(m.metric) == m.k.has_value(), ErrorKind::kParse,
                    "k does not match the metric kind");
    m.methods = j.at("methods").get<std::vector<std::string>>();
    m.n = j.at("n").get<std::size_t>();
    const std::size_t size = m.methods.size();
    detail::Require(size >= 1, ErrorKind::kParse, "matrix has no methods");
    auto read = [&](const char* key) {
      const auto data = j.at(key).get<std::vector<std::vector<double>>>();
      detail::Require(data.size() == size, ErrorKind::kParse,
                      std::string(key) + " has the wrong number of rows");
      Matrix x(size, size);
      for (std::size_t r = 0; r < size; ++r) {
        detail::Require(data[r].size() == size, ErrorKind::kParse,
                        std::string(key) + " is not square");
        for (std::size_t c = 0; c < size; ++c) {
          detail::Require(std::isfinite(data[r][c]), ErrorKind::kParse,
                          std::string(key) + " has a non-finite entry");
          x(r, c) = data[r][c];
        }
      }
      return x;
    };
    m.mean = read("mean");
    m.std_error = read("stderr");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("bad matrix: ") + e.what());
  }
}

inline std::vector<PairwiseMatrix> MatricesFromJson(const nlohmann::json& j) {
  detail::Require(j.is_array(), ErrorKind::kParse,
                  "matrices document must be an array");
  std::vector<PairwiseMatrix> out;
  for (const auto& m : j) out.push_back(MatrixFromJson(m));
  return out;
}

// Long format: one line per (instance, metric, scope, pair).
inline void WriteRecordsCsv(std::ostream& out,
                            const std::vector<InstanceRecord>& records,
                            const std::vector<std::string>& methods) {
  out << "instance_index,predicted_class,metric,k,method_a,method_b,value,"
         "degenerate\n";
  for (const auto& rec : records) {
    for (const auto& v : rec.values) {
      out << rec.instance_index << ',' << rec.predicted_class << ','
          << MetricName(v.metric) << ',' << v.scope << ',' << methods[v.a]
          << ',' << methods[v.b] << ',' << FormatReal(v.value) << ','
          << (v.degenerate ? 1 : 0) << '\n';
    }
  }
}

inline std::string DisplayName(const std::string& method_id) {
  for (Method m : kAllMethods) {
    if (MethodId(m) == method_id) return std::string(MethodDisplayName(m));
  }
  return method_id;
}

namespace detail {

inline std::string XmlEscape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// Heatmap colour for t in [0, 1]: t = 0 is the lightest, t = 1 the darkest.
inline std::string HeatmapColor(double t) {
  t = std::clamp(t, 0.0, 1.0);
  constexpr int kLight[3] = {247, 251, 255};
  constexpr int kDark[3] = {8, 48, 107};
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kLight[c] + t * (kDark[c] - kLight[c])));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

inline std::string HeatmapFileName(const PairwiseMatrix& m) {
  std::string scope = m.Scope();
  std::replace(scope.begin(), scope.end(), ';', '-');
  return std::string(MetricName(m.metric)) + (m.k ? "_k" : "_") + scope + ".svg";
}

// Mean matrix as an SVG grid. Colours map the metric's range linearly, so
// lower values are lighter; each cell is labelled to two decimals and
// carries its standard error as a tooltip.
inline std::string RenderHeatmapSvg(const PairwiseMatrix& m) {
  constexpr int kCell = 64, kLeft = 110, kTop = 50, kBottom = 90;
  const int size = static_cast<int>(m.methods.size());
  const int width = kLeft + size * kCell + 20;
  const int height = kTop + size * kCell + kBottom;
  const double lo = MetricLowerBound(m.metric);
  std::vector<std::string> names;
  for (const auto& id : m.methods) names.push_back(detail::XmlEscape(DisplayName(id)));
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
       "font-size=\"12\">\n";
  s << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">"
    << MetricName(m.metric) << (m.k ? " (k=" : " (features=") << m.Scope()
    << ", n=" << m.n << ")</text>\n";
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double v = m.mean(r, c);
      const double t = (v - lo) / (1.0 - lo);
      const int x = kLeft + c * kCell, y = kTop + r * kCell;
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
        << "\" height=\"" << kCell << "\" fill=\"" << HeatmapColor(t)
        << "\"><title>" << names[r] << " vs "
        << names[c] << ": " << detail::Fixed(v, 4)
        << " (stderr " << detail::Fixed(m.std_error(r, c), 4)
        << ")</title></rect>\n";
      s << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4
        << "\" text-anchor=\"middle\" fill=\""
        << (t > 0.5 ? "#ffffff" : "#000000") << "\">" << detail::Fixed(v, 2)
        << "</text>\n";
    }
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + r * kCell + kCell / 2 + 4
      << "\" text-anchor=\"end\">" << names[r] << "</text>\n";
  }
  for (int c = 0; c < size; ++c) {
    const int x = kLeft + c * kCell + kCell / 2, y = kTop + size * kCell + 12;
    s << "<text x=\"" << x << "\" y=\"" << y
      << "\" text-anchor=\"end\" transform=\"rotate(-45 " << x << " " << y
      << ")\">" << names[c] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace disagree
