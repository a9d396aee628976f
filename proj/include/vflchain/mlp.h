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

// Small fully connected networks with explicit forward/backward passes. Used
// for the clients' local embedding models and for the shared fusion head.

#ifndef VFLCHAIN_MLP_H_
#define VFLCHAIN_MLP_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "vflchain/rng.h"
#include "vflchain/tensor.h"

namespace vflchain {

// kHardTanh clamps to [-1, 1]; it is the hard-clamp alternative to tanh for
// bounding embeddings.
enum class Activation { kIdentity, kRelu, kTanh, kSigmoid, kHardTanh };

std::string_view ToString(Activation a);
Activation ParseActivation(std::string_view name);

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t num_parameters() const;

  // Throws ShapeError unless every layer is well formed and consecutive
  // layers chain.
  void Validate() const;

  // Layer by layer: weight (row-major) then bias.
  std::vector<double> Flatten() const;
  void Unflatten(std::span<const double> flat);

  // Same structure, all parameters zero.
  MlpParams ZerosLike() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Gradients share the parameter container layout.
using MlpGrads = MlpParams;

struct ForwardCache {
  Tensor input;
  std::vector<Tensor> pre_activations;
  std::vector<Tensor> activations;
};

struct ForwardResult {
  Tensor output;
  ForwardCache cache;
};

struct BackwardResult {
  MlpGrads param_grads;
  Tensor input_grad;
};

// batch is B x in_dim; output is B x out_dim.
ForwardResult Forward(const MlpParams& params, const Tensor& batch);

// upstream is dL/d(output), B x out_dim. The cache must come from Forward on
// the same parameter shapes.
BackwardResult Backward(const MlpParams& params, const ForwardCache& cache,
                        const Tensor& upstream);

struct LossAndGrad {
  double loss = 0.0;
  Tensor dloss_dlogits;
};

// Mean binary cross-entropy over B logits (B x 1). The gradient is
// (sigmoid(z) - y) / B, i.e. the derivative of the mean loss.
LossAndGrad BceLossAndGrad(const Tensor& logits, const Tensor& labels);

double Sigmoid(double z);

// p - lr * g for every parameter.
MlpParams SgdStep(const MlpParams& params, const MlpGrads& grads, double lr);

// Layer i maps dims[i] -> dims[i+1] with activations[i]. Weights and biases
// are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
MlpParams InitMlp(std::span<const std::size_t> dims,
                  std::span<const Activation> activations, RandomStream& rng);

struct LocalModelSpec {
  Activation hidden = Activation::kTanh;
  Activation output = Activation::kTanh;
  // Empty means the default widths {ceil(in/2), embedding_dim}.
  std::vector<std::size_t> hidden_dims;
};

// Three-layer local model in -> ceil(in/2) -> P -> P by default.
MlpParams MakeLocalModel(std::size_t in_dim, std::size_t embedding_dim,
                         const LocalModelSpec& spec, RandomStream& rng);

// Single fully connected layer P -> 1 producing a logit.
MlpParams MakeFusionModel(std::size_t embedding_dim, RandomStream& rng);

}  // namespace vflchain

#endif  // VFLCHAIN_MLP_H_
