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

// Post hoc feature attribution methods for one instance: LIME, KernelSHAP
// (exact enumeration or Shapley-kernel regression), vanilla gradient,
// gradient * input, integrated gradients and SmoothGrad, plus the
// sample-size convergence check used to pick their budgets.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disagree/common.hpp"
#include "disagree/models.hpp"

namespace disagree {

enum class Method {
  kLime,
  kKernelShap,
  kGradient,
  kGradTimesInput,
  kIntegratedGradients,
  kSmoothGrad,
};

inline constexpr Method kAllMethods[] = {
    Method::kLime,           Method::kKernelShap,
    Method::kGradient,       Method::kGradTimesInput,
    Method::kIntegratedGradients, Method::kSmoothGrad,
};

inline std::string_view MethodId(Method m) {
  switch (m) {
    case Method::kLime: return "lime";
    case Method::kKernelShap: return "kernelshap";
    case Method::kGradient: return "gradient";
    case Method::kGradTimesInput: return "grad_times_input";
    case Method::kIntegratedGradients: return "integrated_gradients";
    case Method::kSmoothGrad: return "smoothgrad";
  }
  return "";
}

inline std::string_view MethodDisplayName(Method m) {
  switch (m) {
    case Method::kLime: return "LIME";
    case Method::kKernelShap: return "KernelSHAP";
    case Method::kGradient: return "Grad";
    case Method::kGradTimesInput: return "Grad*Input";
    case Method::kIntegratedGradients: return "IntGrad";
    case Method::kSmoothGrad: return "SmoothGrad";
  }
  return "";
}

inline std::string ValidMethodIds() {
  std::string out;
  for (Method m : kAllMethods) {
    out += (out.empty() ? "" : ", ") + std::string(MethodId(m));
  }
  return out;
}

inline Method MethodFromId(std::string_view id) {
  for (Method m : kAllMethods) {
    if (MethodId(m) == id) return m;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown method '" +
                                               std::string(id) +
                                               "'; valid ids: " +
                                               ValidMethodIds());
}

inline bool IsGradientMethod(Method m) {
  return m != Method::kLime && m != Method::kKernelShap;
}

struct Attribution {
  Vector values;
  Method method = Method::kGradient;
  std::size_t instance_index = 0;
  int target_class = 1;

  std::size_t d() const { return static_cast<std::size_t>(values.size()); }
};

struct LimeConfig {
  int n_samples = 3000;
  std::optional<double> kernel_width;  // default 0.75 * sqrt(d)
  double ridge_lambda = 1e-3;
  std::uint64_t seed = 0;
};

enum class ShapMode { kExact, kSampled };

struct KernelShapConfig {
  ShapMode mode = ShapMode::kExact;
  int n_samples = 3000;
  Vector baseline;  // empty means the zero vector
  std::uint64_t seed = 0;
};

struct IntegratedGradientsConfig {
  int steps = 1500;
  Vector baseline;  // empty means the zero vector
  GradientTarget target = GradientTarget::kLogit;
};

struct SmoothGradConfig {
  int n_samples = 1500;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  GradientTarget target = GradientTarget::kLogit;
};

// Scalar value of every row; used for the model output being explained.
using ValueFn = std::function<Vector(const Matrix&)>;

inline constexpr std::size_t kMaxExactShapleyFeatures = 20;

namespace detail {

inline Vector BaselineOrZero(const Vector& baseline, Eigen::Index d) {
  if (baseline.size() == 0) return Vector::Zero(d);
  Require(baseline.size() == d, ErrorKind::kDimensionMismatch,
          "baseline has " + std::to_string(baseline.size()) +
              " entries, instance has " + std::to_string(d));
  return baseline;
}

// Rows of `masks` (0/1) select x where set and the baseline elsewhere.
inline Matrix Compose(const Matrix& masks, const Vector& x, const Vector& b) {
  Matrix out = masks;
  for (Eigen::Index r = 0; r < masks.rows(); ++r) {
    out.row(r) = masks.row(r).cwiseProduct(x.transpose()) +
                 (1.0 - masks.row(r).array()).matrix().cwiseProduct(b.transpose());
  }
  return out;
}

// Maps class-1 probabilities to the probability of `target_class`.
inline ValueFn ClassProbability(BatchPredictFn predict, int target_class) {
  return [predict = std::move(predict), target_class](const Matrix& X) {
    Vector p = predict(X);
    if (target_class == 0) p = (1.0 - p.array()).matrix();
    return p;
  };
}

inline int PredictedClass(const BatchPredictFn& predict, const Vector& x) {
  return predict(Matrix(x.transpose()))[0] >= 0.5 ? 1 : 0;
}

inline double BinomialCoefficient(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace detail

// Shapley values of the game v(S) = f(x on S, baseline elsewhere), by
// enumerating all 2^d coalitions.
inline Vector ExactShapley(const ValueFn& f, const Vector& x,
                           const Vector& baseline) {
  const Eigen::Index d = x.size();
  detail::Require(d >= 1, ErrorKind::kInvalidArgument, "empty instance");
  detail::Require(static_cast<std::size_t>(d) <= kMaxExactShapleyFeatures,
                  ErrorKind::kInvalidArgument,
                  "exact Shapley enumeration supports at most " +
                      std::to_string(kMaxExactShapleyFeatures) +
                      " features, got " + std::to_string(d));
  const Vector b = detail::BaselineOrZero(baseline, d);
  const std::uint64_t n_coalitions = std::uint64_t{1} << d;

  std::vector<double> value(n_coalitions);
  constexpr std::uint64_t kChunk = 4096;
  for (std::uint64_t start = 0; start < n_coalitions; start += kChunk) {
    const std::uint64_t end = std::min(n_coalitions, start + kChunk);
    Matrix masks(end - start, d);
    for (std::uint64_t s = start; s < end; ++s) {
      for (Eigen::Index i = 0; i < d; ++i) masks(s - start, i) = (s >> i) & 1;
    }
    const Vector v = f(detail::Compose(masks, x, b));
    for (std::uint64_t s = start; s < end; ++s) value[s] = v[s - start];
  }

  // |S|! (d - |S| - 1)! / d! = 1 / (d * C(d - 1, |S|))
  std::vector<double> weight(d);
  for (int s = 0; s < d; ++s) {
    weight[s] = 1.0 / (d * detail::BinomialCoefficient(d - 1, s));
  }
  Vector phi = Vector::Zero(d);
  for (std::uint64_t s = 0; s < n_coalitions; ++s) {
    const int size = std::popcount(s);
    for (Eigen::Index i = 0; i < d; ++i) {
      if ((s >> i) & 1) continue;
      phi[i] += weight[size] * (value[s | (std::uint64_t{1} << i)] - value[s]);
    }
  }
  return phi;
}

// KernelSHAP. Exact mode enumerates coalitions directly. Sampled mode solves
// the Shapley-kernel weighted least squares under the efficiency constraint;
// when the budget covers all 2^d - 2 proper coalitions they are enumerated
// with their exact kernel weights, which recovers the Shapley values.
inline Vector KernelShapValues(const ValueFn& f, const Vector& x,
                               const KernelShapConfig& cfg) {
  const Eigen::Index d = x.size();
  const Vector b = detail::BaselineOrZero(cfg.baseline, d);
  if (cfg.mode == ShapMode::kExact) return ExactShapley(f, x, b);

  detail::Require(cfg.n_samples >= 1, ErrorKind::kInvalidArgument,
                  "n_samples must be positive");
  Matrix ends(2, d);
  ends.row(0) = x.transpose();
  ends.row(1) = b.transpose();
  const Vector f_ends = f(ends);
  const double fx = f_ends[0], fb = f_ends[1];
  if (d == 1) return Vector::Constant(1, fx - fb);

  std::vector<std::vector<double>> rows;
  std::vector<double> weights;
  const bool enumerate =
      d < 31 && cfg.n_samples >= (std::int64_t{1} << d) - 2;
  if (enumerate) {
    for (std::uint64_t s = 1; s + 1 < (std::uint64_t{1} << d); ++s) {
      const int size = std::popcount(s);
      std::vector<double> z(d);
      for (Eigen::Index i = 0; i < d; ++i) z[i] = (s >> i) & 1;
      rows.push_back(std::move(z));
      weights.push_back((d - 1) / (detail::BinomialCoefficient(d, size) *
                                   size * (d - size)));
    }
  } else {
    // Sizes drawn proportionally to the kernel mass of each size, subsets
    // uniformly within a size; each draw is paired with its complement.
    std::vector<double> size_mass(d - 1);
    for (int s = 1; s < d; ++s) size_mass[s - 1] = (d - 1.0) / (s * (d - s));
    Rng rng(cfg.seed);
    std::discrete_distribution<int> pick_size(size_mass.begin(),
                                              size_mass.end());
    std::vector<int> perm(d);
    for (int draw = 0; draw < (cfg.n_samples + 1) / 2; ++draw) {
      const int size = pick_size(rng) + 1;
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<double> z(d, 0.0);
      for (int i = 0; i < size; ++i) {
        std::uniform_int_distribution<int> pick(i, d - 1);
        std::swap(perm[i], perm[pick(rng)]);
        z[perm[i]] = 1.0;
      }
      std::vector<double> complement(d);
      for (Eigen::Index i = 0; i < d; ++i) complement[i] = 1.0 - z[i];
      rows.push_back(std::move(z));
      rows.push_back(std::move(complement));
      weights.push_back(1.0);
      weights.push_back(1.0);
    }
  }

  Matrix masks(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index i = 0; i < d; ++i) masks(r, i) = rows[r][i];
  }
  const Vector v = f(detail::Compose(masks, x, b));

  // Eliminate the last coefficient with sum(phi) = fx - fb.
  const double total = fx - fb;
  Matrix A(masks.rows(), d - 1);
  Vector y(masks.rows());
  for (Eigen::Index r = 0; r < masks.rows(); ++r) {
    A.row(r) = masks.row(r).head(d - 1).array() - masks(r, d - 1);
    y[r] = v[r] - fb - masks(r, d - 1) * total;
  }
  const Vector w = Eigen::Map<const Vector>(weights.data(), weights.size());
  const Matrix normal = A.transpose() * w.asDiagonal() * A;
  Eigen::LDLT<Matrix> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.rcond() < 1e-12) {
    throw Error(ErrorKind::kSingular,
                "KernelSHAP regression is singular; increase n_samples");
  }
  const Vector head = ldlt.solve(A.transpose() * w.asDiagonal() * y);
  Vector phi(d);
  phi.head(d - 1) = head;
  phi[d - 1] = total - head.sum();
  return phi;
}

// LIME surrogate: Gaussian perturbations around x (identity covariance),
// exponential kernel weights, weighted ridge regression with an
// unpenalized intercept. Returns the d slope coefficients.
inline Vector LimeValues(const ValueFn& f, const Vector& x,
                         const LimeConfig& cfg) {
  const Eigen::Index d = x.size();
  detail::Require(cfg.n_samples >= d + 2, ErrorKind::kInvalidArgument,
                  "LIME needs at least d + 2 samples");
  detail::Require(cfg.ridge_lambda >= 0.0, ErrorKind::kInvalidArgument,
                  "ridge_lambda must be non-negative");
  const double width = cfg.kernel_width.value_or(0.75 * std::sqrt(double(d)));
  detail::Require(width > 0.0, ErrorKind::kInvalidArgument,
                  "kernel_width must be positive");

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix offsets(cfg.n_samples, d);
  for (Eigen::Index r = 0; r < offsets.rows(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) offsets(r, c) = normal(rng);
  }
  const Vector y = f(offsets.rowwise() + x.transpose());
  const Vector w = (-offsets.rowwise().squaredNorm() / (width * width))
                       .array()
                       .exp()
                       .matrix();

  // Regress on offsets (z - x); slopes are unchanged and the system is
  // better conditioned.
  Matrix A(cfg.n_samples, d + 1);
  A.col(0).setOnes();
  A.rightCols(d) = offsets;
  Matrix normal_eq = A.transpose() * w.asDiagonal() * A;
  normal_eq.diagonal().tail(d).array() += cfg.ridge_lambda;
  Eigen::LDLT<Matrix> ldlt(normal_eq);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.rcond() < 1e-14) {
    throw Error(ErrorKind::kSingular,
                "LIME weighted ridge system is singular");
  }
  const Vector beta = ldlt.solve(A.transpose() * w.asDiagonal() * y);
  return beta.tail(d);
}

inline Attribution ExplainLime(const BatchPredictFn& predict, const Vector& x,
                               const LimeConfig& cfg,
                               std::size_t instance_index = 0) {
  const int cls = detail::PredictedClass(predict, x);
  return {LimeValues(detail::ClassProbability(predict, cls), x, cfg),
          Method::kLime, instance_index, cls};
}

inline Attribution ExplainKernelShap(const BatchPredictFn& predict,
                                     const Vector& x,
                                     const KernelShapConfig& cfg,
                                     std::size_t instance_index = 0) {
  const int cls = detail::PredictedClass(predict, x);
  return {KernelShapValues(detail::ClassProbability(predict, cls), x, cfg),
          Method::kKernelShap, instance_index, cls};
}

template <DifferentiableModel M>
Attribution ExplainGradient(const M& model, const Vector& x,
                            GradientTarget target = GradientTarget::kLogit,
                            std::size_t instance_index = 0) {
  const int cls = PredictLabel(model, x);
  return {InputGradient(model, x, target, cls), Method::kGradient,
          instance_index, cls};
}

template <DifferentiableModel M>
Attribution ExplainGradTimesInput(const M& model, const Vector& x,
                                  GradientTarget target = GradientTarget::kLogit,
                                  std::size_t instance_index = 0) {
  const int cls = PredictLabel(model, x);
  return {InputGradient(model, x, target, cls).cwiseProduct(x),
          Method::kGradTimesInput, instance_index, cls};
}

// Midpoint Riemann sum of the path integral from the baseline to x.
template <DifferentiableModel M>
Attribution ExplainIntegratedGradients(const M& model, const Vector& x,
                                       const IntegratedGradientsConfig& cfg,
                                       std::size_t instance_index = 0) {
  detail::Require(cfg.steps >= 1, ErrorKind::kInvalidArgument,
                  "integrated gradients needs at least one step");
  const Vector x0 = detail::BaselineOrZero(cfg.baseline, x.size());
  const int cls = PredictLabel(model, x);
  const Vector delta = x - x0;
  Matrix path(cfg.steps, x.size());
  for (int j = 0; j < cfg.steps; ++j) {
    const double t = (j + 0.5) / cfg.steps;
    path.row(j) = (x0 + t * delta).transpose();
  }
  const Vector mean_grad =
      InputGradientBatch(model, path, cfg.target, cls).colwise().mean();
  return {delta.cwiseProduct(mean_grad), Method::kIntegratedGradients,
          instance_index, cls};
}

template <DifferentiableModel M>
Attribution ExplainSmoothGrad(const M& model, const Vector& x,
                              const SmoothGradConfig& cfg,
                              std::size_t instance_index = 0) {
  detail::Require(cfg.n_samples >= 1, ErrorKind::kInvalidArgument,
                  "SmoothGrad needs at least one sample");
  detail::Require(cfg.sigma >= 0.0, ErrorKind::kInvalidArgument,
                  "sigma must be non-negative");
  const int cls = PredictLabel(model, x);
  if (cfg.sigma == 0.0) {
    return {InputGradient(model, x, cfg.target, cls), Method::kSmoothGrad,
            instance_index, cls};
  }
  Rng rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.sigma);
  Matrix points(cfg.n_samples, x.size());
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      points(r, c) = x[c] + noise(rng);
    }
  }
  return {InputGradientBatch(model, points, cfg.target, cls).colwise().mean(),
          Method::kSmoothGrad, instance_index, cls};
}

// Everything the dispatcher needs to run any of the six methods.
struct ExplainerConfigs {
  GradientTarget gradient_target = GradientTarget::kLogit;
  LimeConfig lime;
  KernelShapConfig kernelshap;
  IntegratedGradientsConfig integrated_gradients;
  SmoothGradConfig smoothgrad;
};

// Defaults in standardized space: zero baselines (the training mean) and a
// SmoothGrad noise scale of 0.1 times the mean standardized feature range.
inline ExplainerConfigs DefaultExplainerConfigs(std::size_t d,
                                                const Vector& feature_ranges) {
  ExplainerConfigs cfg;
  cfg.kernelshap.baseline = Vector::Zero(d);
  cfg.integrated_gradients.baseline = Vector::Zero(d);
  if (feature_ranges.size() > 0) {
    cfg.smoothgrad.sigma = 0.1 * feature_ranges.mean();
  }
  return cfg;
}

// Runs `method` with `seed` replacing the seed of stochastic configs.
inline Attribution Explain(Method method, const Model& model, const Vector& x,
                           const ExplainerConfigs& cfg, std::uint64_t seed,
                           std::size_t instance_index = 0) {
  detail::CheckDim(ModelDim(model), x.size());
  switch (method) {
    case Method::kLime: {
      LimeConfig c = cfg.lime;
      c.seed = seed;
      return ExplainLime(MakePredictFn(model), x, c, instance_index);
    }
    case Method::kKernelShap: {
      KernelShapConfig c = cfg.kernelshap;
      c.seed = seed;
      return ExplainKernelShap(MakePredictFn(model), x, c, instance_index);
    }
    default:
      break;
  }
  return VisitDifferentiable(model, [&](const auto& m) -> Attribution {
    switch (method) {
      case Method::kGradient:
        return ExplainGradient(m, x, cfg.gradient_target, instance_index);
      case Method::kGradTimesInput:
        return ExplainGradTimesInput(m, x, cfg.gradient_target,
                                     instance_index);
      case Method::kIntegratedGradients: {
        IntegratedGradientsConfig c = cfg.integrated_gradients;
        c.target = cfg.gradient_target;
        return ExplainIntegratedGradients(m, x, c, instance_index);
      }
      default: {
        SmoothGradConfig c = cfg.smoothgrad;
        c.seed = seed;
        c.target = cfg.gradient_target;
        return ExplainSmoothGrad(m, x, c, instance_index);
      }
    }
  });
}

struct ConvergenceResult {
  int chosen_samples = 0;
  bool converged = false;
  // distances[i]: L2 distance between schedule[i + 1] and schedule[i]
  std::vector<double> distances;
};

// Picks the first sample size whose attribution moves less than `eps` (L2)
// from the previous size's attribution; falls back to the last size,
// flagged as not converged.
inline ConvergenceResult ConvergenceCheck(
    const std::function<Vector(int)>& explain_at,
    std::span<const int> schedule, double eps) {
  detail::Require(schedule.size() >= 2, ErrorKind::kInvalidArgument,
                  "convergence schedule needs at least two sizes");
  detail::Require(eps > 0.0, ErrorKind::kInvalidArgument,
                  "eps must be positive");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    detail::Require(schedule[i] > schedule[i - 1], ErrorKind::kInvalidArgument,
                    "convergence schedule must be strictly increasing");
  }
  ConvergenceResult result;
  Vector previous = explain_at(schedule[0]);
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    Vector current = explain_at(schedule[i]);
    result.distances.push_back((current - previous).norm());
    if (result.distances.back() < eps) {
      result.chosen_samples = schedule[i];
      result.converged = true;
      return result;
    }
    previous = std::move(current);
  }
  result.chosen_samples = schedule.back();
  return result;
}

}  // namespace disagree
