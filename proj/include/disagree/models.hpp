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

// Differentiable binary classifiers (logistic regression and a ReLU
// feed-forward network) with batched logits, exact input gradients, and
// mini-batch gradient descent training.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "disagree/common.hpp"
#include "disagree/data.hpp"

namespace disagree {

enum class GradientTarget { kLogit, kProbability };

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 200;
  int batch_size = 64;
  double l2_penalty = 0.0;
  std::uint64_t seed = 0;

  // Zero epochs is allowed and leaves the model at its initialization.
  void Validate() const {
    detail::Require(learning_rate > 0.0 && std::isfinite(learning_rate),
                    ErrorKind::kInvalidArgument,
                    "learning_rate must be positive");
    detail::Require(epochs >= 0, ErrorKind::kInvalidArgument,
                    "epochs must be non-negative");
    detail::Require(batch_size > 0, ErrorKind::kInvalidArgument,
                    "batch_size must be positive");
    detail::Require(l2_penalty >= 0.0, ErrorKind::kInvalidArgument,
                    "l2_penalty must be non-negative");
  }
};

inline nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"l2_penalty", c.l2_penalty},
          {"seed", c.seed}};
}

inline TrainConfig TrainConfigFromJson(const nlohmann::json& j,
                                       TrainConfig base = {}) {
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.epochs = j.value("epochs", base.epochs);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.l2_penalty = j.value("l2_penalty", base.l2_penalty);
  base.seed = j.value("seed", base.seed);
  base.Validate();
  return base;
}

inline double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(Vector w, double b) : w_(std::move(w)), b_(b) {}

  const Vector& weights() const { return w_; }
  double bias() const { return b_; }
  Vector& mutable_weights() { return w_; }
  double& mutable_bias() { return b_; }

  std::size_t d() const { return static_cast<std::size_t>(w_.size()); }

  Vector Logits(const Matrix& X) const {
    return (X * w_).array() + b_;
  }

  // The gradient of w.x + b is w everywhere.
  Matrix LogitGradients(const Matrix& X) const {
    return w_.transpose().replicate(X.rows(), 1);
  }

 private:
  Vector w_;
  double b_ = 0.0;
};

class MlpModel {
 public:
  struct Layer {
    Matrix W;  // out x in
    Vector b;  // out
  };

  MlpModel() = default;
  explicit MlpModel(std::vector<Layer> layers) : layers_(std::move(layers)) {
    CheckShapes();
  }

  // Uniform Glorot initialization in [-r, r], r = sqrt(6 / (fan_in + fan_out)),
  // zero biases.
  static MlpModel Initialize(std::size_t d, const std::vector<int>& hidden,
                             std::uint64_t seed) {
    detail::Require(d >= 1, ErrorKind::kInvalidArgument,
                    "input dimension must be positive");
    std::vector<int> dims{static_cast<int>(d)};
    for (int h : hidden) {
      detail::Require(h >= 1, ErrorKind::kInvalidArgument,
                      "hidden widths must be positive");
      dims.push_back(h);
    }
    dims.push_back(1);
    Rng rng(seed);
    std::vector<Layer> layers;
    for (std::size_t l = 1; l < dims.size(); ++l) {
      const double r = std::sqrt(6.0 / (dims[l - 1] + dims[l]));
      std::uniform_real_distribution<double> u(-r, r);
      Layer layer{Matrix(dims[l], dims[l - 1]), Vector::Zero(dims[l])};
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i) {
        for (Eigen::Index j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = u(rng);
      }
      layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers));
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  std::size_t d() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_[0].W.cols());
  }

  // [d, hidden..., 1]
  std::vector<int> LayerDims() const {
    std::vector<int> dims;
    if (layers_.empty()) return dims;
    dims.push_back(static_cast<int>(layers_[0].W.cols()));
    for (const auto& l : layers_) dims.push_back(static_cast<int>(l.W.rows()));
    return dims;
  }

  Vector Logits(const Matrix& X) const {
    Matrix a = X;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = (a * layers_[l].W.transpose()).rowwise() +
                 layers_[l].b.transpose();
      a = l + 1 < layers_.size() ? Matrix(z.cwiseMax(0.0)) : std::move(z);
    }
    return a.col(0);
  }

  // Reverse-mode gradient of the output logit with respect to each row of X.
  Matrix LogitGradients(const Matrix& X) const {
    std::vector<Matrix> pre;  // hidden pre-activations
    Matrix a = X;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      pre.push_back((a * layers_[l].W.transpose()).rowwise() +
                    layers_[l].b.transpose());
      a = pre.back().cwiseMax(0.0);
    }
    Matrix g = Matrix::Ones(X.rows(), 1);
    for (std::size_t l = layers_.size(); l-- > 0;) {
      g = g * layers_[l].W;
      if (l > 0) g = g.cwiseProduct(ReluMask(pre[l - 1]));
    }
    return g;
  }

 private:
  friend struct MlpTrainer;

  static Matrix ReluMask(const Matrix& z) {
    return (z.array() > 0.0).cast<double>().matrix();
  }

  void CheckShapes() const {
    detail::Require(!layers_.empty(), ErrorKind::kInvalidArgument,
                    "network has no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      detail::Require(layers_[l].b.size() == layers_[l].W.rows(),
                      ErrorKind::kDimensionMismatch,
                      "bias length does not match layer width");
      if (l > 0) {
        detail::Require(layers_[l].W.cols() == layers_[l - 1].W.rows(),
                        ErrorKind::kDimensionMismatch,
                        "consecutive layer dimensions are incompatible");
      }
    }
    detail::Require(layers_.back().W.rows() == 1, ErrorKind::kDimensionMismatch,
                    "output layer must produce a single logit");
  }

  std::vector<Layer> layers_;
};

// Probability of class 1 for every row.
using BatchPredictFn = std::function<Vector(const Matrix&)>;

// A model only reachable through predictions, e.g. one trained elsewhere.
struct BlackBoxModel {
  BatchPredictFn predict;
  std::size_t dim = 0;

  std::size_t d() const { return dim; }
};

template <class M>
concept DifferentiableModel = requires(const M& m, const Matrix& X) {
  { m.Logits(X) } -> std::convertible_to<Vector>;
  { m.LogitGradients(X) } -> std::convertible_to<Matrix>;
  { m.d() } -> std::convertible_to<std::size_t>;
};

using Model = std::variant<LinearModel, MlpModel, BlackBoxModel>;

inline std::string ModelKindName(const Model& m) {
  switch (m.index()) {
    case 0: return "logistic";
    case 1: return "mlp";
    default: return "black_box";
  }
}

inline bool IsDifferentiable(const Model& m) {
  return !std::holds_alternative<BlackBoxModel>(m);
}

inline std::size_t ModelDim(const Model& m) {
  return std::visit([](const auto& v) { return v.d(); }, m);
}

namespace detail {

inline void CheckDim(std::size_t expected, Eigen::Index got) {
  Require(static_cast<std::size_t>(got) == expected,
          ErrorKind::kDimensionMismatch,
          "model expects " + std::to_string(expected) + " features, got " +
              std::to_string(got));
}

}  // namespace detail

// Class-1 probabilities for a batch.
template <DifferentiableModel M>
Vector PredictProbaBatch(const M& model, const Matrix& X) {
  detail::CheckDim(model.d(), X.cols());
  return model.Logits(X).unaryExpr([](double z) { return Sigmoid(z); });
}

inline Vector PredictProbaBatch(const Model& model, const Matrix& X) {
  detail::CheckDim(ModelDim(model), X.cols());
  return std::visit(
      [&](const auto& m) -> Vector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BlackBoxModel>) {
          return m.predict(X);
        } else {
          return PredictProbaBatch(m, X);
        }
      },
      model);
}

template <class M>
double PredictProba(const M& model, const Vector& x) {
  return PredictProbaBatch(model, Matrix(x.transpose()))[0];
}

// Ties at exactly 0.5 go to class 1.
template <class M>
int PredictLabel(const M& model, const Vector& x) {
  return PredictProba(model, x) >= 0.5 ? 1 : 0;
}

inline BatchPredictFn MakePredictFn(Model model) {
  return [model = std::move(model)](const Matrix& X) {
    return PredictProbaBatch(model, X);
  };
}

template <DifferentiableModel M>
double Logit(const M& model, const Vector& x) {
  detail::CheckDim(model.d(), x.size());
  return model.Logits(Matrix(x.transpose()))[0];
}

// Gradient of the class-`target_class` logit or probability for every row of
// X. The class-0 logit is the negated class-1 logit.
template <DifferentiableModel M>
Matrix InputGradientBatch(const M& model, const Matrix& X,
                          GradientTarget target, int target_class = 1) {
  detail::CheckDim(model.d(), X.cols());
  Matrix g = model.LogitGradients(X);
  if (target == GradientTarget::kProbability) {
    // d sigma(z)/dx = p (1 - p) dz/dx, and the same factor for 1 - p.
    const Vector z = model.Logits(X);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double p = Sigmoid(z[i]);
      g.row(i) *= p * (1.0 - p);
    }
  }
  if (target_class == 0) g = -g;
  return g;
}

template <DifferentiableModel M>
Vector InputGradient(const M& model, const Vector& x, GradientTarget target,
                     int target_class = 1) {
  return InputGradientBatch(model, Matrix(x.transpose()), target, target_class)
      .row(0)
      .transpose();
}

// Visits the differentiable alternative of `model`, or throws kIncompatible.
template <class F>
decltype(auto) VisitDifferentiable(const Model& model, F&& f) {
  if (const auto* m = std::get_if<LinearModel>(&model)) return f(*m);
  if (const auto* m = std::get_if<MlpModel>(&model)) return f(*m);
  throw Error(ErrorKind::kIncompatible,
              "gradient requested on a predict-only model");
}

inline Vector InputGradient(const Model& model, const Vector& x,
                            GradientTarget target, int target_class = 1) {
  return VisitDifferentiable(model, [&](const auto& m) {
    return InputGradient(m, x, target, target_class);
  });
}

template <class M>
double Accuracy(const M& model, const Dataset& ds) {
  detail::Require(ds.n() >= 1, ErrorKind::kInvalidArgument, "dataset is empty");
  const Vector p = PredictProbaBatch(model, ds.X);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    correct += (p[i] >= 0.5 ? 1 : 0) == ds.y[i];
  }
  return static_cast<double>(correct) / static_cast<double>(ds.n());
}

namespace detail {

// Visits mini-batches in a seeded per-epoch shuffle and checks the loss.
template <class Step>
void RunEpochs(const Dataset& train, const TrainConfig& cfg, Step&& step) {
  Rng rng(DeriveSeed(cfg.seed, 0, 1));
  std::vector<std::size_t> order(train.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      Matrix X(end - start, train.d());
      Vector y(end - start);
      for (std::size_t i = start; i < end; ++i) {
        X.row(i - start) = train.X.row(order[i]);
        y[i - start] = train.y[order[i]];
      }
      loss += step(X, y);
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::kDivergence,
                  "training loss became non-finite at epoch " +
                      std::to_string(epoch) + "; lower the learning rate");
    }
  }
}

// Mean cross-entropy of logits z against y, plus d(loss)/dz.
inline double CrossEntropy(const Vector& z, const Vector& y, Vector& dz) {
  const double n = static_cast<double>(z.size());
  double loss = 0.0;
  dz.resize(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += Softplus(z[i]) - y[i] * z[i];
    dz[i] = (Sigmoid(z[i]) - y[i]) / n;
  }
  return loss;
}

}  // namespace detail

// Minimizes mean cross-entropy + (l2/2)|w|^2 by mini-batch gradient descent,
// starting from zero parameters.
inline LinearModel TrainLogistic(const Dataset& train, const TrainConfig& cfg) {
  cfg.Validate();
  train.Validate();
  LinearModel model(Vector::Zero(train.d()), 0.0);
  detail::RunEpochs(train, cfg, [&](const Matrix& X, const Vector& y) {
    Vector dz;
    const double loss = detail::CrossEntropy(model.Logits(X), y, dz);
    model.mutable_weights() -=
        cfg.learning_rate *
        (X.transpose() * dz + cfg.l2_penalty * model.weights());
    model.mutable_bias() -= cfg.learning_rate * dz.sum();
    return loss;
  });
  return model;
}

struct MlpTrainer {
  // One gradient-descent step on a batch; returns the batch loss sum.
  static double Step(MlpModel& model, const Matrix& X, const Vector& y,
                     const TrainConfig& cfg) {
    auto& layers = model.layers_;
    std::vector<Matrix> acts{X};
    std::vector<Matrix> pre;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      pre.push_back((acts.back() * layers[l].W.transpose()).rowwise() +
                    layers[l].b.transpose());
      if (l + 1 < layers.size()) acts.push_back(pre.back().cwiseMax(0.0));
    }
    Vector dz_out;
    const double loss = detail::CrossEntropy(pre.back().col(0), y, dz_out);
    Matrix dz = dz_out;
    for (std::size_t l = layers.size(); l-- > 0;) {
      Matrix dW = dz.transpose() * acts[l] + cfg.l2_penalty * layers[l].W;
      Vector db = dz.colwise().sum().transpose();
      if (l > 0) {
        dz = (dz * layers[l].W).cwiseProduct(MlpModel::ReluMask(pre[l - 1]));
      }
      layers[l].W -= cfg.learning_rate * dW;
      layers[l].b -= cfg.learning_rate * db;
    }
    return loss;
  }
};

inline MlpModel TrainMlp(const Dataset& train, const std::vector<int>& hidden,
                         const TrainConfig& cfg) {
  cfg.Validate();
  train.Validate();
  MlpModel model =
      MlpModel::Initialize(train.d(), hidden, DeriveSeed(cfg.seed, 0, 0));
  detail::RunEpochs(train, cfg, [&](const Matrix& X, const Vector& y) {
    return MlpTrainer::Step(model, X, y, cfg);
  });
  return model;
}

// A trained model together with what is needed to apply it to raw rows.
struct ModelBundle {
  Model model;
  FeatureSchema schema;
  Standardizer standardizer;
  // max - min of each standardized training column
  Vector feature_ranges;
  TrainConfig train_config;
  std::vector<int> hidden;
};

inline nlohmann::json ModelToJson(const ModelBundle& bundle) {
  nlohmann::json j;
  j["kind"] = ModelKindName(bundle.model);
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  std::vector<int> dims;
  if (const auto* lin = std::get_if<LinearModel>(&bundle.model)) {
    dims = {static_cast<int>(lin->d()), 1};
    weights.push_back(
        std::vector<double>(lin->weights().begin(), lin->weights().end()));
    biases.push_back(std::vector<double>{lin->bias()});
  } else if (const auto* mlp = std::get_if<MlpModel>(&bundle.model)) {
    dims = mlp->LayerDims();
    for (const auto& layer : mlp->layers()) {
      std::vector<double> flat;  // row-major, out x in
      for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
          flat.push_back(layer.W(r, c));
        }
      }
      weights.push_back(flat);
      biases.push_back(std::vector<double>(layer.b.begin(), layer.b.end()));
    }
  } else {
    throw Error(ErrorKind::kIncompatible, "black-box models cannot be saved");
  }
  j["layer_dims"] = dims;
  j["weights"] = weights;
  j["biases"] = biases;
  j["schema"] = SchemaToJson(bundle.schema);
  j["standardizer"] = StandardizerToJson(bundle.standardizer);
  j["feature_ranges"] = std::vector<double>(bundle.feature_ranges.begin(),
                                            bundle.feature_ranges.end());
  j["train_config"] = TrainConfigToJson(bundle.train_config);
  j["hidden"] = bundle.hidden;
  return j;
}

inline ModelBundle ModelFromJson(const nlohmann::json& j) {
  try {
    ModelBundle bundle;
    const auto kind = j.at("kind").get<std::string>();
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    const auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
    const auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
    detail::Require(dims.size() >= 2 && weights.size() == dims.size() - 1 &&
                        biases.size() == dims.size() - 1,
                    ErrorKind::kParse, "model layer arrays are inconsistent");
    if (kind == "logistic") {
      detail::Require(dims.size() == 2 && dims[1] == 1 &&
                          weights[0].size() == static_cast<std::size_t>(dims[0]) &&
                          biases[0].size() == 1,
                      ErrorKind::kParse, "bad logistic model shape");
      Vector w = Eigen::Map<const Vector>(weights[0].data(), dims[0]);
      bundle.model = LinearModel(w, biases[0][0]);
    } else if (kind == "mlp") {
      std::vector<MlpModel::Layer> layers;
      for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        detail::Require(weights[l].size() == static_cast<std::size_t>(in) * out &&
                            biases[l].size() == static_cast<std::size_t>(out),
                        ErrorKind::kParse,
                        "layer " + std::to_string(l) + " has the wrong size");
        MlpModel::Layer layer{Matrix(out, in),
                              Eigen::Map<const Vector>(biases[l].data(), out)};
        for (int r = 0; r < out; ++r) {
          for (int c = 0; c < in; ++c) layer.W(r, c) = weights[l][r * in + c];
        }
        layers.push_back(std::move(layer));
      }
      bundle.model = MlpModel(std::move(layers));
    } else {
      throw Error(ErrorKind::kParse, "unknown model kind '" + kind + "'");
    }
    bundle.schema = SchemaFromJson(j.at("schema"));
    bundle.standardizer = StandardizerFromJson(j.at("standardizer"));
    auto ranges = j.at("feature_ranges").get<std::vector<double>>();
    bundle.feature_ranges = Eigen::Map<Vector>(ranges.data(), ranges.size());
    bundle.train_config = TrainConfigFromJson(j.at("train_config"));
    bundle.hidden = j.value("hidden", std::vector<int>{});
    detail::Require(bundle.schema.d() == ModelDim(bundle.model) &&
                        bundle.standardizer.d() == bundle.schema.d() &&
                        bundle.feature_ranges.size() ==
                            static_cast<Eigen::Index>(bundle.schema.d()),
                    ErrorKind::kParse,
                    "model, schema and standardizer dimensions disagree");
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("bad model file: ") + e.what());
  }
}

}  // namespace disagree
