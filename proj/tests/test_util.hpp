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

// Shared helpers for the test binaries: temporary directories, synthetic
// datasets, random networks and attribution generators.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "disagree/disagree.hpp"

namespace disagree::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("disagree_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// n rows of d Gaussian features; label = [w.x + noise > 0] with w_i = i - d/2.
inline void WriteSyntheticCsv(const std::string& csv, const std::string& schema,
                              std::size_t n, std::size_t d,
                              std::uint64_t seed = 3) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::ostringstream out;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) {
    names.push_back("f" + std::to_string(j));
    out << names.back() << ',';
  }
  out << "label\n";
  for (std::size_t i = 0; i < n; ++i) {
    double score = 0.3 * normal(rng);
    for (std::size_t j = 0; j < d; ++j) {
      const double x = 2.0 + normal(rng);
      score += (static_cast<double>(j) - d / 2.0) * (x - 2.0) +
               0.5 * (j == 0 ? (x - 2.0) * (x - 2.0) - 1.0 : 0.0);
      out << FormatReal(x) << ',';
    }
    out << (score > 0 ? 1 : 0) << '\n';
  }
  WriteFile(csv, out.str());
  nlohmann::json s{{"features", names}, {"label", "label"}};
  WriteFile(schema, s.dump());
}

inline MlpModel RandomMlp(std::size_t d, Rng& rng) {
  std::uniform_int_distribution<int> depth(1, 3), width(2, 12);
  std::vector<int> hidden(depth(rng));
  for (int& h : hidden) h = width(rng);
  MlpModel m = MlpModel::Initialize(d, hidden, rng());
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& layer : m.mutable_layers()) {
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b[i] = normal(rng);
  }
  return m;
}

inline Vector RandomVector(std::size_t d, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

// Attribution-like vectors that regularly contain ties, zeros and mixed
// signs, so the tie and sign rules are exercised.
inline Vector RandomAttribution(std::size_t d, Rng& rng) {
  std::uniform_int_distribution<int> style(0, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> grid(-4, 4);
  std::bernoulli_distribution zero(0.15);
  const int s = style(rng);
  Vector v(d);
  for (std::size_t i = 0; i < d; ++i) {
    switch (s) {
      case 0: v[i] = normal(rng); break;
      case 1: v[i] = grid(rng) / 8.0; break;  // many ties and zeros
      case 2: v[i] = zero(rng) ? 0.0 : normal(rng); break;
      default: v[i] = std::round(normal(rng) * 4.0) / 4.0; break;
    }
  }
  return v;
}

// A fast end-to-end config over a synthetic table written into `dir`.
inline nlohmann::json SmallConfigJson(const std::string& dir,
                                      std::size_t rows = 300,
                                      std::size_t d = 6) {
  WriteSyntheticCsv(dir + "/data.csv", dir + "/schema.json", rows, d);
  return {
      {"dataset", {{"csv", "data.csv"}, {"schema", "schema.json"}}},
      {"split", {{"test_fraction", 0.3}}},
      {"model",
       {{"kind", "mlp"},
        {"hidden", {8}},
        {"train", {{"learning_rate", 0.05}, {"epochs", 20}, {"batch_size", 32}}}}},
      {"explainers",
       {{"lime", {{"n_samples", 200}}},
        {"kernelshap", {{"mode", "exact"}}},
        {"integrated_gradients", {{"steps", 50}}},
        {"smoothgrad", {{"n_samples", 50}}}}},
      {"metrics", {{"k", {2, 4}}}},
      {"max_instances", 25},
      {"seed", 11},
      {"threads", 1}};
}

inline ExperimentConfig SmallConfig(const TempDir& dir) {
  return ExperimentConfigFromJson(SmallConfigJson(dir.path().string()),
                                  dir.path());
}

// Central finite differences of the class-1 logit (or probability).
template <class M>
Vector FiniteDifferenceGradient(const M& model, const Vector& x,
                                GradientTarget target, double h = 1e-6) {
  auto value = [&](const Vector& z) {
    const double logit = Logit(model, z);
    return target == GradientTarget::kLogit ? logit : Sigmoid(logit);
  };
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector up = x, down = x;
    up[i] += h;
    down[i] -= h;
    g[i] = (value(up) - value(down)) / (2.0 * h);
  }
  return g;
}

inline double RelativeError(const Vector& got, const Vector& want) {
  const double scale = std::max({got.norm(), want.norm(), 1e-8});
  return (got - want).norm() / scale;
}

}  // namespace disagree::testing
