#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cliffscale/error.hpp"
#include "cliffscale/rng.hpp"

namespace cliffscale::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Per-layer tensors shaped like an MlpModel; used for gradients and Adam moments.
struct LayerTensors {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  bool same_shape(const LayerTensors& other) const {
    if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols()) return false;
      if (biases[l].size() != other.biases[l].size()) return false;
    }
    return true;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }

  /// Layer by layer: weights row-major, then biases.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[l].cols(); ++c) out.push_back(weights[l](r, c));
      for (Eigen::Index r = 0; r < biases[l].size(); ++r) out.push_back(biases[l][r]);
    }
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != size()) throw DataError("parameter vector has the wrong length");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = flat[k++];
      for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l][r] = flat[k++];
    }
  }
};

using MlpGradients = LayerTensors;

struct ForwardCache {
  // activations[0] is the input batch; activations[l] the post-ReLU output of
  // layer l; the last entry is the linear network output (1 x batch).
  std::vector<Matrix> activations;

  RowVector output() const { return activations.back().row(0); }
};

/// Fully connected ReLU regressor with scalar output.
class MlpModel {
 public:
  MlpModel() = default;

  /// Zero-initialized model with the given layer sizes.
  explicit MlpModel(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output layers");
    for (int s : sizes_)
      if (s < 1) throw ConfigError("MLP layer sizes must be positive");
    if (sizes_.back() != 1) throw ConfigError("MLP output layer must have size 1");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      params_.weights.push_back(Matrix::Zero(sizes_[l + 1], sizes_[l]));
      params_.biases.push_back(Vector::Zero(sizes_[l + 1]));
    }
  }

  /// [input_dim, width x hidden_layers, 1] with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
  /// weights and biases.
  static MlpModel create(int input_dim, int width, int hidden_layers, Rng& rng) {
    std::vector<int> sizes{input_dim};
    for (int i = 0; i < hidden_layers; ++i) sizes.push_back(width);
    sizes.push_back(1);
    MlpModel model(sizes);
    for (std::size_t l = 0; l < model.params_.weights.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
      auto& w = model.params_.weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
      auto& b = model.params_.biases[l];
      for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = bound * (2.0 * rng.uniform() - 1.0);
    }
    return model;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  std::size_t layer_count() const { return params_.weights.size(); }
  LayerTensors& parameters() { return params_; }
  const LayerTensors& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  MlpGradients zero_like() const {
    MlpGradients g = params_;
    g.set_zero();
    return g;
  }

  /// Forward pass over a batch (input_dim x batch), keeping activations for backward.
  ForwardCache forward_cache(const Matrix& inputs) const {
    check_inputs(inputs);
    ForwardCache cache;
    cache.activations.reserve(layer_count() + 1);
    cache.activations.push_back(inputs);
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Matrix z = params_.weights[l] * cache.activations.back();
      z.colwise() += params_.biases[l];
      if (l + 1 < layer_count()) z = z.cwiseMax(0.0);
      cache.activations.push_back(std::move(z));
    }
    const auto& out = cache.activations.back();
    if (!out.allFinite()) throw NumericalError("non-finite network output (training diverged)");
    return cache;
  }

  RowVector forward(const Matrix& inputs) const { return forward_cache(inputs).output(); }

  double forward_point(const Vector& x) const { return forward(x)(0); }

 private:
  void check_inputs(const Matrix& inputs) const {
    if (inputs.rows() != input_dim())
      throw DataError("MLP input has " + std::to_string(inputs.rows()) + " rows, expected " +
                      std::to_string(input_dim()));
  }

  std::vector<int> sizes_;
  LayerTensors params_;
};

inline double mlp_forward(const MlpModel& model, const Vector& x) { return model.forward_point(x); }

/// Backpropagates dLoss/dOutput (1 x batch) through a cached forward pass.
inline MlpGradients mlp_backward(const MlpModel& model, const ForwardCache& cache, const RowVector& output_grad) {
  const auto layers = model.layer_count();
  if (cache.activations.size() != layers + 1) throw DataError("forward cache does not match the model");
  if (output_grad.size() != cache.activations.back().cols()) throw DataError("output gradient has the wrong batch size");
  MlpGradients grads = model.zero_like();
  Matrix delta = output_grad;
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& input = cache.activations[l];
    grads.weights[l].noalias() = delta * input.transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix back = model.parameters().weights[l].transpose() * delta;
    // ReLU derivative: pass-through where the post-activation is positive.
    delta = back.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
  }
  return grads;
}

inline MlpGradients mlp_backward(const MlpModel& model, const Matrix& inputs, const RowVector& output_grad) {
  return mlp_backward(model, model.forward_cache(inputs), output_grad);
}

struct AdamHyperparameters {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyperparameters hyper;
  std::int64_t step = 0;
  LayerTensors first_moment;
  LayerTensors second_moment;

  static AdamState for_model(const MlpModel& model, AdamHyperparameters hyper = {}) {
    return {hyper, 0, model.zero_like(), model.zero_like()};
  }
};

/// One bias-corrected Adam update of `model` in place.
inline void adam_step(AdamState& state, MlpModel& model, const MlpGradients& grads) {
  auto& params = model.parameters();
  if (!grads.same_shape(params) || !state.first_moment.same_shape(params) || !state.second_moment.same_shape(params))
    throw DataError("Adam state, gradients and parameters must share shapes");
  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    p.array() -= h.step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], state.first_moment.weights[l], state.second_moment.weights[l], grads.weights[l]);
    update(params.biases[l], state.first_moment.biases[l], state.second_moment.biases[l], grads.biases[l]);
  }
}

/// Checkpoint format: {"layer_sizes": [...], "weights": [[row-major]...], "biases": [[...]...]}.
inline nlohmann::ordered_json to_json(const MlpModel& model) {
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  nlohmann::ordered_json biases = nlohmann::ordered_json::array();
  const auto& p = model.parameters();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) flat.push_back(p.weights[l](r, c));
    weights.push_back(flat);
    biases.push_back(std::vector<double>(p.biases[l].data(), p.biases[l].data() + p.biases[l].size()));
  }
  return {{"layer_sizes", model.layer_sizes()}, {"weights", weights}, {"biases", biases}};
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  try {
    MlpModel model(j.at("layer_sizes").get<std::vector<int>>());
    auto& p = model.parameters();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != p.weights.size() || biases.size() != p.biases.size())
      throw DataError("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      const auto w = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(p.weights[l].size()) || b.size() != static_cast<std::size_t>(p.biases[l].size()))
        throw DataError("checkpoint tensor size mismatch in layer " + std::to_string(l));
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r)
        for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) p.weights[l](r, c) = w[k++];
      for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) p.biases[l][r] = b[static_cast<std::size_t>(r)];
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint JSON: ") + e.what());
  }
}

}  // namespace cliffscale::nn
