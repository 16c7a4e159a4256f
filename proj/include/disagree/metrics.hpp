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

// Disagreement metrics between two feature attributions of the same
// instance. Four metrics compare the top-k features (by magnitude); two
// compare the ordering of a user-chosen feature subset.
//
// Conventions:
//   * top-k order is descending |value|, ties broken by ascending index;
//   * sign(v) is -1, 0 or +1, and 0 only matches 0;
//   * subset rankings use magnitudes unless RankingBasis::kSigned is asked
//     for.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disagree/common.hpp"

namespace disagree {

enum class MetricId {
  kFeatureAgreement,
  kRankAgreement,
  kSignAgreement,
  kSignedRankAgreement,
  kRankCorrelation,
  kPairwiseRankAgreement,
};

inline constexpr MetricId kAllMetrics[] = {
    MetricId::kFeatureAgreement,    MetricId::kRankAgreement,
    MetricId::kSignAgreement,       MetricId::kSignedRankAgreement,
    MetricId::kRankCorrelation,     MetricId::kPairwiseRankAgreement,
};

inline std::string_view MetricName(MetricId id) {
  switch (id) {
    case MetricId::kFeatureAgreement: return "feature_agreement";
    case MetricId::kRankAgreement: return "rank_agreement";
    case MetricId::kSignAgreement: return "sign_agreement";
    case MetricId::kSignedRankAgreement: return "signed_rank_agreement";
    case MetricId::kRankCorrelation: return "rank_correlation";
    case MetricId::kPairwiseRankAgreement: return "pairwise_rank_agreement";
  }
  return "";
}

inline MetricId MetricFromName(std::string_view name) {
  std::string valid;
  for (MetricId id : kAllMetrics) {
    if (MetricName(id) == name) return id;
    valid += (valid.empty() ? "" : ", ") + std::string(MetricName(id));
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown metric '" +
                                               std::string(name) +
                                               "'; valid ids: " + valid);
}

inline bool IsTopKMetric(MetricId id) {
  return id != MetricId::kRankCorrelation &&
         id != MetricId::kPairwiseRankAgreement;
}

// Lower end of the metric's range; the upper end is always 1.
inline double MetricLowerBound(MetricId id) {
  return id == MetricId::kRankCorrelation ? -1.0 : 0.0;
}

enum class RankingBasis { kMagnitude, kSigned };

inline int Sign(double v) { return (v > 0.0) - (v < 0.0); }

struct TopKSelection {
  std::size_t k = 0;
  std::vector<std::size_t> features;  // rank 1 first
};

inline TopKSelection TopFeatures(const Vector& e, std::size_t k) {
  const std::size_t d = static_cast<std::size_t>(e.size());
  detail::Require(k >= 1 && k <= d, ErrorKind::kInvalidArgument,
                  "k=" + std::to_string(k) + " must lie in [1, " +
                      std::to_string(d) + "]");
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ma = std::abs(e[a]), mb = std::abs(e[b]);
                      return ma != mb ? ma > mb : a < b;
                    });
  order.resize(k);
  return {k, std::move(order)};
}

struct FeatureSubset {
  std::vector<std::size_t> indices;

  static FeatureSubset All(std::size_t d) {
    FeatureSubset f;
    f.indices.resize(d);
    std::iota(f.indices.begin(), f.indices.end(), std::size_t{0});
    return f;
  }

  void Validate(std::size_t d) const {
    detail::Require(indices.size() >= 2, ErrorKind::kInvalidArgument,
                    "feature subset needs at least 2 features");
    std::vector<bool> seen(d, false);
    for (std::size_t i : indices) {
      detail::Require(i < d, ErrorKind::kInvalidArgument,
                      "feature index " + std::to_string(i) + " out of range");
      detail::Require(!seen[i], ErrorKind::kInvalidArgument,
                      "feature index " + std::to_string(i) + " repeated");
      seen[i] = true;
    }
  }

  // "all" for the full feature set of dimension d, else "i;j;...".
  std::string Descriptor(std::size_t d) const {
    if (indices == All(d).indices) return "all";
    std::string out;
    for (std::size_t i : indices) {
      out += (out.empty() ? "" : ";") + std::to_string(i);
    }
    return out;
  }
};

namespace detail {

inline void CheckPair(const Vector& a, const Vector& b) {
  Require(a.size() == b.size(), ErrorKind::kDimensionMismatch,
          "attributions have different lengths (" + std::to_string(a.size()) +
              " vs " + std::to_string(b.size()) + ")");
}

// Counts features present in both top-k lists that also pass `match`, which
// receives (feature, rank in a, rank in b).
template <class Match>
double TopKFraction(const Vector& a, const Vector& b, std::size_t k,
                    Match match) {
  CheckPair(a, b);
  const auto ta = TopFeatures(a, k);
  const auto tb = TopFeatures(b, k);
  std::vector<std::size_t> rank_b(a.size(), 0);  // 0 = absent
  for (std::size_t r = 0; r < k; ++r) rank_b[tb.features[r]] = r + 1;
  std::size_t count = 0;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t f = ta.features[r];
    if (rank_b[f] != 0 && match(f, r + 1, rank_b[f])) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(k);
}

inline double RankingKey(double v, RankingBasis basis) {
  return basis == RankingBasis::kMagnitude ? std::abs(v) : v;
}

// Average (fractional) ranks, 1-based, ascending key order.
inline std::vector<double> AverageRanks(const std::vector<double>& keys) {
  const std::size_t n = keys.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return keys[x] < keys[y]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && keys[order[j + 1]] == keys[order[i]]) ++j;
    const double avg = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

inline double FeatureAgreement(const Vector& a, const Vector& b,
                               std::size_t k) {
  return detail::TopKFraction(a, b, k, [](auto...) { return true; });
}

inline double RankAgreement(const Vector& a, const Vector& b, std::size_t k) {
  return detail::TopKFraction(
      a, b, k, [](std::size_t, std::size_t ra, std::size_t rb) { return ra == rb; });
}

inline double SignAgreement(const Vector& a, const Vector& b, std::size_t k) {
  return detail::TopKFraction(a, b, k, [&](std::size_t f, std::size_t, std::size_t) {
    return Sign(a[f]) == Sign(b[f]);
  });
}

inline double SignedRankAgreement(const Vector& a, const Vector& b,
                                  std::size_t k) {
  return detail::TopKFraction(
      a, b, k, [&](std::size_t f, std::size_t ra, std::size_t rb) {
        return ra == rb && Sign(a[f]) == Sign(b[f]);
      });
}

struct RankCorrelationResult {
  double value = 0.0;
  // Set when either ranking has zero variance; value is then 0.
  bool degenerate = false;
};

// Spearman's coefficient as the Pearson correlation of average ranks.
inline RankCorrelationResult RankCorrelation(
    const Vector& a, const Vector& b, const FeatureSubset& subset,
    RankingBasis basis = RankingBasis::kMagnitude) {
  detail::CheckPair(a, b);
  subset.Validate(static_cast<std::size_t>(a.size()));
  std::vector<double> ka, kb;
  for (std::size_t i : subset.indices) {
    ka.push_back(detail::RankingKey(a[i], basis));
    kb.push_back(detail::RankingKey(b[i], basis));
  }
  const auto ra = detail::AverageRanks(ka);
  const auto rb = detail::AverageRanks(kb);
  const double mean = (static_cast<double>(ra.size()) + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (va == 0.0 || vb == 0.0) return {0.0, true};
  return {std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0), false};
}

// Fraction of feature pairs whose relative order (greater, tied or less)
// is the same in both attributions.
inline double PairwiseRankAgreement(
    const Vector& a, const Vector& b, const FeatureSubset& subset,
    RankingBasis basis = RankingBasis::kMagnitude) {
  detail::CheckPair(a, b);
  subset.Validate(static_cast<std::size_t>(a.size()));
  const auto& f = subset.indices;
  std::size_t agree = 0, pairs = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = i + 1; j < f.size(); ++j) {
      const int oa = Sign(detail::RankingKey(a[f[i]], basis) -
                          detail::RankingKey(a[f[j]], basis));
      const int ob = Sign(detail::RankingKey(b[f[i]], basis) -
                          detail::RankingKey(b[f[j]], basis));
      agree += oa == ob;
      ++pairs;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

struct MetricResult {
  MetricId metric = MetricId::kFeatureAgreement;
  double value = 0.0;
  std::optional<std::size_t> k;         // top-k metrics
  std::optional<FeatureSubset> subset;  // subset metrics
  bool degenerate = false;
};

// Dispatches on `metric`; `k` is used by top-k metrics and `subset` by the
// other two.
inline MetricResult ComputeMetric(MetricId metric, const Vector& a,
                                  const Vector& b, std::size_t k,
                                  const FeatureSubset& subset,
                                  RankingBasis basis = RankingBasis::kMagnitude) {
  MetricResult r;
  r.metric = metric;
  switch (metric) {
    case MetricId::kFeatureAgreement:
      r.value = FeatureAgreement(a, b, k);
      break;
    case MetricId::kRankAgreement:
      r.value = RankAgreement(a, b, k);
      break;
    case MetricId::kSignAgreement:
      r.value = SignAgreement(a, b, k);
      break;
    case MetricId::kSignedRankAgreement:
      r.value = SignedRankAgreement(a, b, k);
      break;
    case MetricId::kRankCorrelation: {
      const auto rc = RankCorrelation(a, b, subset, basis);
      r.value = rc.value;
      r.degenerate = rc.degenerate;
      break;
    }
    case MetricId::kPairwiseRankAgreement:
      r.value = PairwiseRankAgreement(a, b, subset, basis);
      break;
  }
  if (IsTopKMetric(metric)) {
    r.k = k;
  } else {
    r.subset = subset;
  }
  return r;
}

}  // namespace disagree
