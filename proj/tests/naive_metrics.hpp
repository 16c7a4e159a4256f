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

// Independent reference implementations of the six disagreement metrics,
// written by direct enumeration of features and feature pairs. They share no
// code with include/disagree/metrics.hpp and exist only to check it.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "disagree/common.hpp"

namespace disagree::naive {

// 1-based position of feature f in the magnitude order (index tie-break).
inline std::size_t Position(const Vector& e, std::size_t f) {
  std::size_t before = 0;
  for (Eigen::Index g = 0; g < e.size(); ++g) {
    const double mg = std::fabs(e[g]), mf = std::fabs(e[f]);
    if (mg > mf || (mg == mf && static_cast<std::size_t>(g) < f)) ++before;
  }
  return before + 1;
}

inline int SignOf(double v) {
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

enum class Rule { kFeature, kRank, kSign, kSignedRank };

inline double TopK(const Vector& a, const Vector& b, std::size_t k, Rule rule) {
  std::size_t hits = 0;
  for (Eigen::Index f = 0; f < a.size(); ++f) {
    const std::size_t pa = Position(a, f), pb = Position(b, f);
    if (pa > k || pb > k) continue;
    const bool same_rank = pa == pb;
    const bool same_sign = SignOf(a[f]) == SignOf(b[f]);
    switch (rule) {
      case Rule::kFeature: ++hits; break;
      case Rule::kRank: hits += same_rank; break;
      case Rule::kSign: hits += same_sign; break;
      case Rule::kSignedRank: hits += same_rank && same_sign; break;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

// Twice the average rank: 2 * (1 + #smaller) + (#equal - 1).
inline long DoubledRank(const std::vector<double>& keys, std::size_t i) {
  long smaller = 0, equal = 0;
  for (double key : keys) {
    smaller += key < keys[i];
    equal += key == keys[i];
  }
  return 2 * (1 + smaller) + (equal - 1);
}

// Spearman on doubled (integer) ranks; returns 0 for zero variance.
inline double Spearman(const Vector& a, const Vector& b,
                       const std::vector<std::size_t>& features) {
  std::vector<double> ka, kb;
  for (std::size_t f : features) {
    ka.push_back(std::fabs(a[f]));
    kb.push_back(std::fabs(b[f]));
  }
  const long n = static_cast<long>(features.size());
  long cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const long da = DoubledRank(ka, i) - (n + 1);
    const long db = DoubledRank(kb, i) - (n + 1);
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0 || vb == 0) return 0.0;
  return static_cast<double>(cov) /
         std::sqrt(static_cast<double>(va) * static_cast<double>(vb));
}

inline double PairwiseAgreement(const Vector& a, const Vector& b,
                                const std::vector<std::size_t>& features) {
  auto order = [](const Vector& e, std::size_t i, std::size_t j) {
    const double mi = std::fabs(e[i]), mj = std::fabs(e[j]);
    return mi > mj ? 1 : (mi < mj ? -1 : 0);
  };
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      agree += order(a, features[i], features[j]) ==
               order(b, features[i], features[j]);
      ++total;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace disagree::naive
