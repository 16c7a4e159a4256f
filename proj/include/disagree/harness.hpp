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

// End-to-end experiments: split and standardize a dataset, train a model,
// explain test instances with every configured method, score every method
// pair with every configured metric, and aggregate to mean / standard error
// matrices.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/common.hpp"
#include "disagree/data.hpp"
#include "disagree/explainers.hpp"
#include "disagree/metrics.hpp"
#include "disagree/models.hpp"

namespace disagree {

struct ExperimentConfig {
  std::string dataset_path;
  std::string schema_path;
  double test_fraction = 0.3;
  std::optional<std::uint64_t> split_seed;  // derived from seed if unset

  std::string model_kind = "mlp";  // "mlp" or "logistic"
  std::vector<int> hidden{50, 100, 100, 50};
  TrainConfig train;
  std::optional<std::uint64_t> train_seed;  // derived from seed if unset

  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  GradientTarget gradient_target = GradientTarget::kLogit;
  LimeConfig lime;
  KernelShapConfig kernelshap;
  IntegratedGradientsConfig integrated_gradients;
  SmoothGradConfig smoothgrad;
  std::optional<double> smoothgrad_sigma;  // default from feature ranges

  std::vector<MetricId> metrics{std::begin(kAllMetrics), std::end(kAllMetrics)};
  std::vector<std::size_t> k_values;  // empty: 25/50/75/100% of d
  std::optional<std::vector<std::size_t>> feature_subset;  // default: all
  RankingBasis ranking_basis = RankingBasis::kMagnitude;

  std::optional<std::size_t> max_instances;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency

  void Validate() const {
    detail::Require(!dataset_path.empty(), ErrorKind::kInvalidArgument,
                    "config field 'dataset.csv' is missing");
    detail::Require(!schema_path.empty(), ErrorKind::kInvalidArgument,
                    "config field 'dataset.schema' is missing");
    detail::Require(test_fraction > 0.0 && test_fraction < 1.0,
                    ErrorKind::kInvalidArgument,
                    "config field 'split.test_fraction' must lie in (0, 1)");
    detail::Require(model_kind == "mlp" || model_kind == "logistic",
                    ErrorKind::kInvalidArgument,
                    "config field 'model.kind' must be 'mlp' or 'logistic'");
    train.Validate();
    detail::Require(methods.size() >= 2, ErrorKind::kInvalidArgument,
                    "config field 'explainers.methods' needs at least 2 methods");
    detail::Require(!metrics.empty(), ErrorKind::kInvalidArgument,
                    "config field 'metrics.ids' is empty");
    detail::Require(!max_instances || *max_instances >= 1,
                    ErrorKind::kInvalidArgument,
                    "config field 'max_instances' must be positive");
    detail::Require(threads >= 0, ErrorKind::kInvalidArgument,
                    "config field 'threads' must be non-negative");
  }
};

namespace detail {

template <class T>
T ConfigValue(const nlohmann::json& j, const char* key, const std::string& path,
              T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::kInvalidArgument,
                "config field '" + path + "' has the wrong type");
  }
}

inline const nlohmann::json& ConfigSection(const nlohmann::json& j,
                                           const char* key) {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  if (!j.contains(key) || j.at(key).is_null()) return kEmpty;
  Require(j.at(key).is_object(), ErrorKind::kInvalidArgument,
          std::string("config field '") + key + "' must be an object");
  return j.at(key);
}

inline GradientTarget GradientTargetFromName(const std::string& name) {
  if (name == "logit") return GradientTarget::kLogit;
  if (name == "probability") return GradientTarget::kProbability;
  throw Error(ErrorKind::kInvalidArgument,
              "gradient_target must be 'logit' or 'probability'");
}

inline std::string GradientTargetName(GradientTarget t) {
  return t == GradientTarget::kLogit ? "logit" : "probability";
}

}  // namespace detail

// Relative dataset paths resolve against `base_dir`.
inline ExperimentConfig ExperimentConfigFromJson(
    const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::ConfigSection;
  using detail::ConfigValue;
  detail::Require(j.is_object(), ErrorKind::kInvalidArgument,
                  "config must be a JSON object");
  ExperimentConfig cfg;
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base_dir / path).lexically_normal().string();
  };

  const auto& ds = ConfigSection(j, "dataset");
  cfg.dataset_path = resolve(ConfigValue<std::string>(ds, "csv", "dataset.csv", ""));
  cfg.schema_path =
      resolve(ConfigValue<std::string>(ds, "schema", "dataset.schema", ""));

  const auto& split = ConfigSection(j, "split");
  cfg.test_fraction = ConfigValue(split, "test_fraction", "split.test_fraction",
                                  cfg.test_fraction);
  if (split.contains("seed") && !split["seed"].is_null()) {
    cfg.split_seed = ConfigValue<std::uint64_t>(split, "seed", "split.seed", 0);
  }

  const auto& model = ConfigSection(j, "model");
  cfg.model_kind = ConfigValue(model, "kind", "model.kind", cfg.model_kind);
  cfg.hidden = ConfigValue(model, "hidden", "model.hidden", cfg.hidden);
  const auto& train = ConfigSection(model, "train");
  cfg.train.learning_rate = ConfigValue(train, "learning_rate",
                                        "model.train.learning_rate",
                                        cfg.train.learning_rate);
  cfg.train.epochs =
      ConfigValue(train, "epochs", "model.train.epochs", cfg.train.epochs);
  cfg.train.batch_size = ConfigValue(train, "batch_size",
                                     "model.train.batch_size",
                                     cfg.train.batch_size);
  cfg.train.l2_penalty = ConfigValue(train, "l2_penalty",
                                     "model.train.l2_penalty",
                                     cfg.train.l2_penalty);
  if (train.contains("seed") && !train["seed"].is_null()) {
    cfg.train_seed =
        ConfigValue<std::uint64_t>(train, "seed", "model.train.seed", 0);
  }

  const auto& ex = ConfigSection(j, "explainers");
  if (ex.contains("methods")) {
    cfg.methods.clear();
    for (const auto& id : ConfigValue<std::vector<std::string>>(
             ex, "methods", "explainers.methods", {})) {
      cfg.methods.push_back(MethodFromId(id));
    }
  }
  cfg.gradient_target = detail::GradientTargetFromName(ConfigValue<std::string>(
      ex, "gradient_target", "explainers.gradient_target", "logit"));
  const auto& lime = ConfigSection(ex, "lime");
  cfg.lime.n_samples = ConfigValue(lime, "n_samples",
                                   "explainers.lime.n_samples",
                                   cfg.lime.n_samples);
  if (lime.contains("kernel_width") && !lime["kernel_width"].is_null()) {
    cfg.lime.kernel_width = ConfigValue<double>(
        lime, "kernel_width", "explainers.lime.kernel_width", 0.0);
  }
  cfg.lime.ridge_lambda = ConfigValue(lime, "ridge_lambda",
                                      "explainers.lime.ridge_lambda",
                                      cfg.lime.ridge_lambda);
  const auto& shap = ConfigSection(ex, "kernelshap");
  const auto mode = ConfigValue<std::string>(shap, "mode",
                                             "explainers.kernelshap.mode",
                                             "exact");
  detail::Require(mode == "exact" || mode == "sampled",
                  ErrorKind::kInvalidArgument,
                  "config field 'explainers.kernelshap.mode' must be 'exact' "
                  "or 'sampled'");
  cfg.kernelshap.mode = mode == "exact" ? ShapMode::kExact : ShapMode::kSampled;
  cfg.kernelshap.n_samples = ConfigValue(shap, "n_samples",
                                         "explainers.kernelshap.n_samples",
                                         cfg.kernelshap.n_samples);
  const auto& ig = ConfigSection(ex, "integrated_gradients");
  cfg.integrated_gradients.steps =
      ConfigValue(ig, "steps", "explainers.integrated_gradients.steps",
                  cfg.integrated_gradients.steps);
  const auto& sg = ConfigSection(ex, "smoothgrad");
  cfg.smoothgrad.n_samples = ConfigValue(sg, "n_samples",
                                         "explainers.smoothgrad.n_samples",
                                         cfg.smoothgrad.n_samples);
  if (sg.contains("sigma") && !sg["sigma"].is_null()) {
    cfg.smoothgrad_sigma =
        ConfigValue<double>(sg, "sigma", "explainers.smoothgrad.sigma", 0.0);
  }

  const auto& metrics = ConfigSection(j, "metrics");
  if (metrics.contains("ids")) {
    cfg.metrics.clear();
    for (const auto& id : ConfigValue<std::vector<std::string>>(
             metrics, "ids", "metrics.ids", {})) {
      cfg.metrics.push_back(MetricFromName(id));
    }
  }
  cfg.k_values = ConfigValue(metrics, "k", "metrics.k", cfg.k_values);
  if (metrics.contains("features") && !metrics["features"].is_null()) {
    cfg.feature_subset = ConfigValue<std::vector<std::size_t>>(
        metrics, "features", "metrics.features", {});
  }
  const auto basis = ConfigValue<std::string>(
      metrics, "ranking_basis", "metrics.ranking_basis", "magnitude");
  detail::Require(basis == "magnitude" || basis == "signed",
                  ErrorKind::kInvalidArgument,
                  "config field 'metrics.ranking_basis' must be 'magnitude' "
                  "or 'signed'");
  cfg.ranking_basis =
      basis == "magnitude" ? RankingBasis::kMagnitude : RankingBasis::kSigned;

  if (j.contains("max_instances") && !j["max_instances"].is_null()) {
    cfg.max_instances =
        ConfigValue<std::size_t>(j, "max_instances", "max_instances", 0);
  }
  cfg.seed = ConfigValue(j, "seed", "seed", cfg.seed);
  cfg.threads = ConfigValue(j, "threads", "threads", cfg.threads);
  cfg.Validate();
  return cfg;
}

inline ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  detail::Require(in.good(), ErrorKind::kIo, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  return ExperimentConfigFromJson(
      j, std::filesystem::path(path).parent_path());
}

// Canonical echo of a config; the run manifest hashes this text.
inline nlohmann::json ExperimentConfigToJson(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = {{"csv", cfg.dataset_path}, {"schema", cfg.schema_path}};
  j["split"] = {{"test_fraction", cfg.test_fraction}};
  if (cfg.split_seed) j["split"]["seed"] = *cfg.split_seed;
  j["model"] = {{"kind", cfg.model_kind},
                {"hidden", cfg.hidden},
                {"train", TrainConfigToJson(cfg.train)}};
  j["model"]["train"].erase("seed");
  if (cfg.train_seed) j["model"]["train"]["seed"] = *cfg.train_seed;
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.emplace_back(MethodId(m));
  j["explainers"] = {
      {"methods", methods},
      {"gradient_target", detail::GradientTargetName(cfg.gradient_target)},
      {"lime",
       {{"n_samples", cfg.lime.n_samples},
        {"kernel_width", cfg.lime.kernel_width
                             ? nlohmann::json(*cfg.lime.kernel_width)
                             : nlohmann::json(nullptr)},
        {"ridge_lambda", cfg.lime.ridge_lambda}}},
      {"kernelshap",
       {{"mode", cfg.kernelshap.mode == ShapMode::kExact ? "exact" : "sampled"},
        {"n_samples", cfg.kernelshap.n_samples}}},
      {"integrated_gradients", {{"steps", cfg.integrated_gradients.steps}}},
      {"smoothgrad",
       {{"n_samples", cfg.smoothgrad.n_samples},
        {"sigma", cfg.smoothgrad_sigma ? nlohmann::json(*cfg.smoothgrad_sigma)
                                       : nlohmann::json(nullptr)}}}};
  std::vector<std::string> metrics;
  for (MetricId m : cfg.metrics) metrics.emplace_back(MetricName(m));
  j["metrics"] = {
      {"ids", metrics},
      {"k", cfg.k_values},
      {"features", cfg.feature_subset ? nlohmann::json(*cfg.feature_subset)
                                      : nlohmann::json(nullptr)},
      {"ranking_basis", cfg.ranking_basis == RankingBasis::kMagnitude
                            ? "magnitude"
                            : "signed"}};
  j["max_instances"] = cfg.max_instances ? nlohmann::json(*cfg.max_instances)
                                         : nlohmann::json(nullptr);
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  return j;
}

// DISAGREE_SEED, when set, replaces the master seed.
inline void ApplySeedOverride(ExperimentConfig& cfg) {
  if (const char* env = std::getenv("DISAGREE_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    detail::Require(end && *end == '\0', ErrorKind::kInvalidArgument,
                    "DISAGREE_SEED must be a non-negative integer");
    cfg.seed = v;
  }
}

// Stream ids for DeriveSeed under the master seed.
inline constexpr std::uint64_t kSplitStream = 1000;
inline constexpr std::uint64_t kTrainStream = 1001;

inline std::uint64_t SplitSeed(const ExperimentConfig& cfg) {
  return cfg.split_seed.value_or(DeriveSeed(cfg.seed, 0, kSplitStream));
}

inline std::uint64_t TrainSeed(const ExperimentConfig& cfg) {
  return cfg.train_seed.value_or(DeriveSeed(cfg.seed, 0, kTrainStream));
}

// Seed of one explainer run; independent of scheduling.
inline std::uint64_t InstanceSeed(std::uint64_t master, std::size_t instance,
                                  Method method) {
  return DeriveSeed(master, instance, static_cast<std::uint64_t>(method));
}

// 25%, 50%, 75% and 100% of d, rounded up, without duplicates.
inline std::vector<std::size_t> DefaultKGrid(std::size_t d) {
  std::vector<std::size_t> ks;
  for (int quarter = 1; quarter <= 4; ++quarter) {
    const auto k = static_cast<std::size_t>(std::ceil(d * quarter / 4.0));
    if (k >= 1 && (ks.empty() || ks.back() != k)) ks.push_back(k);
  }
  return ks;
}

struct PreparedData {
  Dataset train;  // standardized
  Dataset test;   // standardized
  Standardizer standardizer;
  std::size_t n_total = 0;
};

inline PreparedData PrepareData(const ExperimentConfig& cfg) {
  const FeatureSchema schema = LoadSchema(cfg.schema_path);
  const Dataset ds = LoadCsv(cfg.dataset_path, schema);
  auto [train, test] = TrainTestSplit(ds, cfg.test_fraction, SplitSeed(cfg));
  PreparedData out;
  out.n_total = ds.n();
  out.standardizer = FitStandardizer(train);
  out.train = out.standardizer.Apply(train);
  out.test = out.standardizer.Apply(test);
  return out;
}

inline ModelBundle TrainModel(const ExperimentConfig& cfg,
                              const PreparedData& data) {
  TrainConfig train = cfg.train;
  train.seed = TrainSeed(cfg);
  ModelBundle bundle;
  if (cfg.model_kind == "logistic") {
    bundle.model = TrainLogistic(data.train, train);
  } else {
    bundle.model = TrainMlp(data.train, cfg.hidden, train);
    bundle.hidden = cfg.hidden;
  }
  bundle.schema = data.train.schema;
  bundle.standardizer = data.standardizer;
  bundle.feature_ranges =
      (data.train.X.colwise().maxCoeff() - data.train.X.colwise().minCoeff())
          .transpose();
  bundle.train_config = train;
  return bundle;
}

inline ExplainerConfigs MakeExplainerConfigs(const ExperimentConfig& cfg,
                                             const ModelBundle& bundle) {
  ExplainerConfigs ex =
      DefaultExplainerConfigs(bundle.schema.d(), bundle.feature_ranges);
  ex.gradient_target = cfg.gradient_target;
  ex.lime = cfg.lime;
  ex.kernelshap.mode = cfg.kernelshap.mode;
  ex.kernelshap.n_samples = cfg.kernelshap.n_samples;
  ex.integrated_gradients.steps = cfg.integrated_gradients.steps;
  ex.smoothgrad.n_samples = cfg.smoothgrad.n_samples;
  if (cfg.smoothgrad_sigma) ex.smoothgrad.sigma = *cfg.smoothgrad_sigma;
  return ex;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware
// concurrency). The first exception thrown by any call is rethrown.
template <class Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// attributions[i][m]: method m on row i of X.
inline std::vector<std::vector<Attribution>> ExplainInstances(
    const Model& model, const Matrix& X, const std::vector<Method>& methods,
    const ExplainerConfigs& cfg, std::uint64_t master_seed, int threads = 0) {
  for (Method m : methods) {
    detail::Require(!IsGradientMethod(m) || IsDifferentiable(model),
                    ErrorKind::kIncompatible,
                    "method '" + std::string(MethodId(m)) +
                        "' needs gradients but the model is predict-only");
  }
  std::vector<std::vector<Attribution>> out(static_cast<std::size_t>(X.rows()));
  ParallelFor(out.size(), threads, [&](std::size_t i) {
    const Vector x = X.row(i).transpose();
    for (Method m : methods) {
      out[i].push_back(
          Explain(m, model, x, cfg, InstanceSeed(master_seed, i, m), i));
    }
  });
  return out;
}

struct AggregateResult {
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean and standard error (sample standard deviation / sqrt(n)).
inline AggregateResult Aggregate(std::span<const double> values) {
  detail::Require(!values.empty(), ErrorKind::kInvalidArgument,
                  "cannot aggregate an empty list");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

struct PairwiseMatrix {
  MetricId metric = MetricId::kFeatureAgreement;
  std::optional<std::size_t> k;  // top-k metrics
  std::string subset;            // subset metrics: "all" or "i;j;..."
  std::vector<std::string> methods;
  Matrix mean;
  Matrix std_error;
  std::size_t n = 0;

  // "5" for top-k metrics, the subset descriptor otherwise.
  std::string Scope() const { return k ? std::to_string(*k) : subset; }
};

struct PairMetricValue {
  MetricId metric;
  std::string scope;
  std::size_t a;  // method positions, a < b
  std::size_t b;
  double value;
  bool degenerate;
};

struct InstanceRecord {
  std::size_t instance_index = 0;
  int predicted_class = 1;
  std::vector<Attribution> attributions;  // one per method
  std::vector<PairMetricValue> values;
};

struct MetricPlan {
  std::vector<MetricId> metrics{std::begin(kAllMetrics), std::end(kAllMetrics)};
  std::vector<std::size_t> k_values;
  std::optional<FeatureSubset> subset;  // default: all features
  RankingBasis basis = RankingBasis::kMagnitude;
};

struct Evaluation {
  std::vector<PairwiseMatrix> matrices;
  // per_instance[i]: metric values of every off-diagonal pair
  std::vector<std::vector<PairMetricValue>> per_instance;
};

// Scores every method pair (diagonal included) for every instance and
// aggregates. attributions[i][m] holds method m on instance i. Matrices come
// out in plan order, top-k metrics once per k.
inline Evaluation EvaluateAttributions(
    const std::vector<std::string>& methods,
    const std::vector<std::vector<Vector>>& attributions,
    const MetricPlan& plan) {
  const std::size_t n_methods = methods.size();
  detail::Require(n_methods >= 1, ErrorKind::kInvalidArgument, "no methods");
  detail::Require(!attributions.empty(), ErrorKind::kInvalidArgument,
                  "no instances to evaluate");
  const std::size_t d = static_cast<std::size_t>(attributions[0][0].size());
  for (const auto& row : attributions) {
    detail::Require(row.size() == n_methods, ErrorKind::kDimensionMismatch,
                    "instance is missing a method's attribution");
    for (const auto& v : row) {
      detail::Require(static_cast<std::size_t>(v.size()) == d,
                      ErrorKind::kDimensionMismatch,
                      "attributions have different lengths");
      detail::Require(v.allFinite(), ErrorKind::kInvalidArgument,
                      "attribution has non-finite values");
    }
  }
  const FeatureSubset subset = plan.subset.value_or(FeatureSubset::All(d));
  for (std::size_t k : plan.k_values) {
    detail::Require(k >= 1 && k <= d, ErrorKind::kInvalidArgument,
                    "k=" + std::to_string(k) + " must lie in [1, " +
                        std::to_string(d) + "]");
  }

  struct Job {
    MetricId metric;
    std::size_t k;
  };
  std::vector<Job> jobs;
  for (MetricId m : plan.metrics) {
    if (IsTopKMetric(m)) {
      detail::Require(!plan.k_values.empty(), ErrorKind::kInvalidArgument,
                      "top-k metric requested without k values");
      for (std::size_t k : plan.k_values) jobs.push_back({m, k});
    } else {
      subset.Validate(d);
      jobs.push_back({m, 0});
    }
  }

  const std::size_t n = attributions.size();
  Evaluation out;
  out.per_instance.resize(n);
  for (const Job& job : jobs) {
    PairwiseMatrix pm;
    pm.metric = job.metric;
    if (IsTopKMetric(job.metric)) {
      pm.k = job.k;
    } else {
      pm.subset = subset.Descriptor(d);
    }
    pm.methods = methods;
    pm.n = n;
    pm.mean = Matrix::Zero(n_methods, n_methods);
    pm.std_error = Matrix::Zero(n_methods, n_methods);
    std::vector<double> cell(n);
    for (std::size_t a = 0; a < n_methods; ++a) {
      for (std::size_t b = a; b < n_methods; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto r = ComputeMetric(job.metric, attributions[i][a],
                                       attributions[i][b], job.k, subset,
                                       plan.basis);
          cell[i] = r.value;
          if (a != b) {
            out.per_instance[i].push_back(
                {job.metric, pm.Scope(), a, b, r.value, r.degenerate});
          }
        }
        const auto agg = Aggregate(cell);
        pm.mean(a, b) = pm.mean(b, a) = agg.mean;
        pm.std_error(a, b) = pm.std_error(b, a) = agg.std_error;
      }
    }
    out.matrices.push_back(std::move(pm));
  }
  return out;
}

struct RunManifest {
  std::string config_hash;
  nlohmann::json config;
  std::string model_kind;
  std::size_t n_rows = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_explained = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<std::size_t> k_values;
  std::map<std::string, double> timings_seconds;

  nlohmann::json ToJson() const {
    return {{"config_hash", config_hash},
            {"config", config},
            {"model_kind", model_kind},
            {"n_rows", n_rows},
            {"n_train", n_train},
            {"n_test", n_test},
            {"n_explained", n_explained},
            {"train_accuracy", train_accuracy},
            {"test_accuracy", test_accuracy},
            {"k_values", k_values},
            {"timings_seconds", timings_seconds}};
  }
};

struct RunResult {
  std::vector<PairwiseMatrix> matrices;
  std::vector<InstanceRecord> records;
  RunManifest manifest;
  ModelBundle model;
};

inline std::string ConfigHash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    Fnv1a(ExperimentConfigToJson(cfg).dump())));
  return buf;
}

inline std::vector<std::string> MethodIds(const std::vector<Method>& methods) {
  std::vector<std::string> ids;
  for (Method m : methods) ids.emplace_back(MethodId(m));
  return ids;
}

// Explains every (capped) test instance once and scores all configured
// metrics at every configured k from those attributions.
inline RunResult RunExperiment(const ExperimentConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  };
  cfg.Validate();
  RunResult result;
  auto& manifest = result.manifest;
  manifest.config = ExperimentConfigToJson(cfg);
  manifest.config_hash = ConfigHash(cfg);

  auto t = Clock::now();
  const PreparedData data = PrepareData(cfg);
  const std::size_t d = data.train.d();
  std::vector<std::size_t> k_values =
      cfg.k_values.empty() ? DefaultKGrid(d) : cfg.k_values;
  manifest.timings_seconds["prepare"] = seconds_since(t);

  t = Clock::now();
  result.model = TrainModel(cfg, data);
  manifest.timings_seconds["train"] = seconds_since(t);
  manifest.model_kind = ModelKindName(result.model.model);
  manifest.n_rows = data.n_total;
  manifest.n_train = data.train.n();
  manifest.n_test = data.test.n();
  manifest.train_accuracy = Accuracy(result.model.model, data.train);
  manifest.test_accuracy = Accuracy(result.model.model, data.test);
  manifest.k_values = k_values;

  const std::size_t n_explain =
      std::min(data.test.n(), cfg.max_instances.value_or(data.test.n()));
  manifest.n_explained = n_explain;
  t = Clock::now();
  const auto attributions = ExplainInstances(
      result.model.model, data.test.X.topRows(n_explain), cfg.methods,
      MakeExplainerConfigs(cfg, result.model), cfg.seed, cfg.threads);
  manifest.timings_seconds["explain"] = seconds_since(t);

  t = Clock::now();
  std::vector<std::vector<Vector>> values(n_explain);
  for (std::size_t i = 0; i < n_explain; ++i) {
    for (const auto& a : attributions[i]) values[i].push_back(a.values);
  }
  MetricPlan plan;
  plan.metrics = cfg.metrics;
  plan.k_values = k_values;
  if (cfg.feature_subset) plan.subset = FeatureSubset{*cfg.feature_subset};
  plan.basis = cfg.ranking_basis;
  Evaluation eval = EvaluateAttributions(MethodIds(cfg.methods), values, plan);
  manifest.timings_seconds["metrics"] = seconds_since(t);

  result.matrices = std::move(eval.matrices);
  result.records.resize(n_explain);
  for (std::size_t i = 0; i < n_explain; ++i) {
    auto& rec = result.records[i];
    rec.instance_index = i;
    rec.predicted_class = attributions[i].front().target_class;
    rec.attributions = attributions[i];
    rec.values = std::move(eval.per_instance[i]);
  }
  return result;
}

// RunExperiment over an explicit k grid; attributions are shared by all k.
inline RunResult SweepK(ExperimentConfig cfg,
                        const std::vector<std::size_t>& k_values) {
  detail::Require(!k_values.empty(), ErrorKind::kInvalidArgument,
                  "k sweep needs at least one k");
  cfg.k_values = k_values;
  return RunExperiment(cfg);
}

inline const PairwiseMatrix* FindMatrix(const std::vector<PairwiseMatrix>& ms,
                                        MetricId metric,
                                        const std::string& scope) {
  for (const auto& m : ms) {
    if (m.metric == metric && m.Scope() == scope) return &m;
  }
  return nullptr;
}

struct PairSummary {
  std::string method_a;
  std::string method_b;
  double mean = 0.0;
  double std_error = 0.0;
  bool both_gradient = false;
  bool strong = false;  // mean at or above the report threshold
};

// Method pairs ordered by mean rank correlation over all features, highest
// first (ties by name). Pairs of two gradient methods are marked.
inline std::vector<PairSummary> DichotomyReport(
    const std::vector<PairwiseMatrix>& matrices, double threshold = 0.5) {
  const PairwiseMatrix* rc =
      FindMatrix(matrices, MetricId::kRankCorrelation, "all");
  detail::Require(rc != nullptr, ErrorKind::kInvalidArgument,
                  "dichotomy report needs rank_correlation over all features");
  auto is_gradient = [](const std::string& id) {
    for (Method m : kAllMethods) {
      if (MethodId(m) == id) return IsGradientMethod(m);
    }
    return false;
  };
  std::vector<PairSummary> pairs;
  for (std::size_t a = 0; a < rc->methods.size(); ++a) {
    for (std::size_t b = a + 1; b < rc->methods.size(); ++b) {
      PairSummary p{rc->methods[a], rc->methods[b], rc->mean(a, b),
                    rc->std_error(a, b), false, false};
      p.both_gradient = is_gradient(p.method_a) && is_gradient(p.method_b);
      p.strong = p.mean >= threshold;
      pairs.push_back(std::move(p));
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const PairSummary& x, const PairSummary& y) {
                     if (x.mean != y.mean) return x.mean > y.mean;
                     if (x.method_a != y.method_a) return x.method_a < y.method_a;
                     return x.method_b < y.method_b;
                   });
  return pairs;
}

}  // namespace disagree
