// Copyright 2026 The vflchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vflchain/mlp.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vflchain/errors.h"

namespace vflchain {
namespace {

double Activate(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kSigmoid:
      return Sigmoid(z);
    case Activation::kHardTanh:
      return std::clamp(z, -1.0, 1.0);
  }
  return z;
}

// Derivative expressed through the pre-activation z and output y.
double ActivationSlope(Activation a, double z, double y) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    case Activation::kHardTanh:
      return (z > -1.0 && z < 1.0) ? 1.0 : 0.0;
  }
  return 1.0;
}

void CheckLayer(const DenseLayer& layer, std::size_t index) {
  if (layer.weight.rank() != 2 || layer.bias.rank() != 1 ||
      layer.bias.size() != layer.weight.rows()) {
    throw ShapeError("layer " + std::to_string(index) + ": weight " +
                     ShapeToString(layer.weight.shape()) + " and bias " +
                     ShapeToString(layer.bias.shape()) + " do not match");
  }
}

}  // namespace

std::string_view ToString(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kHardTanh:
      return "hardtanh";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  for (Activation a : {Activation::kIdentity, Activation::kRelu,
                       Activation::kTanh, Activation::kSigmoid,
                       Activation::kHardTanh}) {
    if (ToString(a) == name) return a;
  }
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t MlpParams::in_dim() const {
  if (layers.empty()) throw ShapeError("empty network");
  return layers.front().in_dim();
}

std::size_t MlpParams::out_dim() const {
  if (layers.empty()) throw ShapeError("empty network");
  return layers.back().out_dim();
}

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::Validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    CheckLayer(layers[i], i);
    if (i > 0 && layers[i - 1].out_dim() != layers[i].in_dim()) {
      throw ShapeError("layer " + std::to_string(i - 1) + " emits " +
                       std::to_string(layers[i - 1].out_dim()) +
                       " values but layer " + std::to_string(i) +
                       " expects " + std::to_string(layers[i].in_dim()));
    }
  }
}

std::vector<double> MlpParams::Flatten() const {
  std::vector<double> flat;
  flat.reserve(num_parameters());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
    flat.insert(flat.end(), l.bias.values().begin(), l.bias.values().end());
  }
  return flat;
}

void MlpParams::Unflatten(std::span<const double> flat) {
  if (flat.size() != num_parameters()) {
    throw ShapeError("Unflatten: expected " + std::to_string(num_parameters()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for (auto& l : layers) {
    for (double& w : l.weight.values()) w = flat[k++];
    for (double& b : l.bias.values()) b = flat[k++];
  }
}

MlpParams MlpParams::ZerosLike() const {
  MlpParams z = *this;
  for (auto& l : z.layers) {
    std::fill(l.weight.values().begin(), l.weight.values().end(), 0.0);
    std::fill(l.bias.values().begin(), l.bias.values().end(), 0.0);
  }
  return z;
}

ForwardResult Forward(const MlpParams& params, const Tensor& batch) {
  params.Validate();
  if (batch.rank() != 2 || batch.cols() != params.in_dim()) {
    throw ShapeError("Forward: batch " + ShapeToString(batch.shape()) +
                     " does not match input dimension " +
                     std::to_string(params.in_dim()));
  }
  ForwardResult result;
  result.cache.input = batch;
  const std::size_t rows = batch.rows();
  const Tensor* x = &batch;
  for (const auto& layer : params.layers) {
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    Tensor z = Tensor::Matrix(rows, out);
    Tensor y = Tensor::Matrix(rows, out);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < in; ++i) acc += (*x)(r, i) * layer.weight(o, i);
        z(r, o) = acc;
        y(r, o) = Activate(layer.activation, acc);
      }
    }
    result.cache.pre_activations.push_back(std::move(z));
    result.cache.activations.push_back(std::move(y));
    x = &result.cache.activations.back();
  }
  result.output = result.cache.activations.back();
  return result;
}

BackwardResult Backward(const MlpParams& params, const ForwardCache& cache,
                        const Tensor& upstream) {
  params.Validate();
  const std::size_t n_layers = params.layers.size();
  if (cache.pre_activations.size() != n_layers ||
      cache.activations.size() != n_layers || cache.input.rank() != 2 ||
      cache.input.cols() != params.in_dim()) {
    throw ShapeError("Backward: cache was not produced by this network");
  }
  const std::size_t rows = cache.input.rows();
  for (std::size_t k = 0; k < n_layers; ++k) {
    const std::size_t expect[] = {rows, params.layers[k].out_dim()};
    RequireShape(cache.activations[k], expect, "Backward cache");
    RequireShape(cache.pre_activations[k], expect, "Backward cache");
  }
  const std::size_t out_shape[] = {rows, params.out_dim()};
  RequireShape(upstream, out_shape, "Backward upstream");

  BackwardResult result{params.ZerosLike(), {}};
  Tensor grad = upstream;  // dL/d(activation of layer k)
  for (std::size_t k = n_layers; k-- > 0;) {
    const DenseLayer& layer = params.layers[k];
    const Tensor& z = cache.pre_activations[k];
    const Tensor& y = cache.activations[k];
    const Tensor& x = k == 0 ? cache.input : cache.activations[k - 1];
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();

    Tensor dz = Tensor::Matrix(rows, out);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        dz(r, o) = grad(r, o) * ActivationSlope(layer.activation, z(r, o), y(r, o));
      }
    }
    DenseLayer& g = result.param_grads.layers[k];
    Tensor dx = Tensor::Matrix(rows, in);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dz(r, o);
        g.bias[o] += d;
        for (std::size_t i = 0; i < in; ++i) {
          g.weight(o, i) += d * x(r, i);
          dx(r, i) += d * layer.weight(o, i);
        }
      }
    }
    grad = std::move(dx);
  }
  result.input_grad = std::move(grad);
  return result;
}

LossAndGrad BceLossAndGrad(const Tensor& logits, const Tensor& labels) {
  if (logits.rank() != 2 || logits.cols() != 1) {
    throw ShapeError("BceLossAndGrad: logits must be B x 1, got " +
                     ShapeToString(logits.shape()));
  }
  RequireShape(labels, logits.shape(), "BceLossAndGrad labels");
  const std::size_t n = logits.rows();
  if (n == 0) throw ShapeError("BceLossAndGrad: empty batch");
  LossAndGrad out{0.0, Tensor::Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw ValidationError("BceLossAndGrad: label " + std::to_string(y) +
                            " at row " + std::to_string(i) + " is not 0 or 1");
    }
    const double z = logits[i];
    // log(1 + e^z) - y z, evaluated without overflow.
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    out.loss += softplus - y * z;
    out.dloss_dlogits[i] = (Sigmoid(z) - y) / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  return out;
}

MlpParams SgdStep(const MlpParams& params, const MlpGrads& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ValidationError("SgdStep: learning rate must be finite and >= 0");
  }
  if (params.layers.size() != grads.layers.size()) {
    throw ShapeError("SgdStep: gradient has a different layer count");
  }
  MlpParams next = params;
  for (std::size_t k = 0; k < next.layers.size(); ++k) {
    auto& p = next.layers[k];
    const auto& g = grads.layers[k];
    if (!p.weight.SameShape(g.weight) || !p.bias.SameShape(g.bias)) {
      throw ShapeError("SgdStep: gradient for layer " + std::to_string(k) +
                       " is not congruent with the parameters");
    }
    for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight[i] -= lr * g.weight[i];
    for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= lr * g.bias[i];
  }
  return next;
}

MlpParams InitMlp(std::span<const std::size_t> dims,
                  std::span<const Activation> activations, RandomStream& rng) {
  if (dims.size() < 2 || activations.size() + 1 != dims.size()) {
    throw ValidationError("InitMlp: need n+1 dims for n activations");
  }
  MlpParams params;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    if (in == 0 || out == 0) throw ValidationError("InitMlp: zero-width layer");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Tensor::Matrix(out, in), Tensor::Zeros({out}), activations[k]};
    for (double& w : layer.weight.values()) w = rng.Uniform(-bound, bound);
    for (double& b : layer.bias.values()) b = rng.Uniform(-bound, bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

MlpParams MakeLocalModel(std::size_t in_dim, std::size_t embedding_dim,
                         const LocalModelSpec& spec, RandomStream& rng) {
  std::vector<std::size_t> dims{in_dim};
  if (spec.hidden_dims.empty()) {
    dims.push_back((in_dim + 1) / 2);
    dims.push_back(embedding_dim);
  } else {
    dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  }
  dims.push_back(embedding_dim);
  std::vector<Activation> acts(dims.size() - 1, spec.hidden);
  acts.back() = spec.output;
  return InitMlp(dims, acts, rng);
}

MlpParams MakeFusionModel(std::size_t embedding_dim, RandomStream& rng) {
  const std::size_t dims[] = {embedding_dim, 1};
  const Activation acts[] = {Activation::kIdentity};
  return InitMlp(dims, acts, rng);
}

}  // namespace vflchain
