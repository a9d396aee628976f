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

#include "vflchain/pbm.h"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

namespace vflchain {
namespace {

double CheckedInput(double a, const PbmParams& params, RangePolicy policy,
                    std::size_t row, std::size_t col) {
  if (std::isfinite(a) && std::abs(a) <= params.c) return a;
  const std::string where =
      "(" + std::to_string(row) + ", " + std::to_string(col) + ")";
  if (policy == RangePolicy::kStrict || !std::isfinite(a)) {
    throw PbmRangeError("PBM input " + std::to_string(a) + " at " + where +
                            " is outside [-C, C] with C = " +
                            std::to_string(params.c),
                        row, col);
  }
  spdlog::warn("PBM input {} at {} clamped to +/-{}", a, where, params.c);
  return a > 0.0 ? params.c : -params.c;
}

std::int64_t SampleBinomial(std::int64_t trials, double p, RandomStream& rng) {
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < trials; ++i) k += rng.Bernoulli(p) ? 1 : 0;
  return k;
}

}  // namespace

void PbmParams::Validate() const {
  if (b < 1) throw ValidationError("PBM: b must be >= 1, got " + std::to_string(b));
  if (!(beta > 0.0 && beta <= 0.25)) {
    throw ValidationError("PBM: beta must lie in (0, 1/4], got " +
                          std::to_string(beta));
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ValidationError("PBM: C must be positive, got " + std::to_string(c));
  }
}

QuantizedBatch::QuantizedBatch(std::size_t rows, std::size_t cols,
                               std::vector<std::int64_t> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("QuantizedBatch: " + std::to_string(rows_) + "x" +
                     std::to_string(cols_) + " needs " +
                     std::to_string(rows_ * cols_) + " values, got " +
                     std::to_string(values_.size()));
  }
}

bool QuantizedBatch::InRange(std::int64_t max) const {
  for (std::int64_t v : values_) {
    if (v < 0 || v > max) return false;
  }
  return true;
}

QuantizedBatch& QuantizedBatch::operator+=(const QuantizedBatch& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError("QuantizedBatch sum: shape mismatch");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

double PbmProbability(double a, const PbmParams& params) {
  return 0.5 + (params.beta / params.c) * a;
}

std::int64_t PbmQuantizeScalar(double a, const PbmParams& params,
                               RandomStream& rng, RangePolicy policy) {
  params.Validate();
  a = CheckedInput(a, params, policy, 0, 0);
  return SampleBinomial(params.b, PbmProbability(a, params), rng);
}

QuantizedBatch PbmQuantizeBatch(const Tensor& embeddings, const PbmParams& params,
                                RandomStream& rng, RangePolicy policy) {
  params.Validate();
  QuantizedBatch q(embeddings.rows(), embeddings.cols());
  for (std::size_t r = 0; r < q.rows(); ++r) {
    for (std::size_t c = 0; c < q.cols(); ++c) {
      const double a = CheckedInput(embeddings(r, c), params, policy, r, c);
      q(r, c) = SampleBinomial(params.b, PbmProbability(a, params), rng);
    }
  }
  return q;
}

Tensor PbmExpectedCounts(const Tensor& embeddings, const PbmParams& params) {
  params.Validate();
  Tensor out = embeddings;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = CheckedInput(embeddings[i], params, RangePolicy::kStrict,
                                  i / embeddings.cols(), i % embeddings.cols());
    out[i] = static_cast<double>(params.b) * PbmProbability(a, params);
  }
  return out;
}

Tensor PbmEstimateSum(const QuantizedBatch& q_hat, int clients,
                      const PbmParams& params) {
  params.Validate();
  if (clients < 1) throw ValidationError("PBM estimate: need at least one client");
  const std::int64_t max = params.b * clients;
  for (std::size_t r = 0; r < q_hat.rows(); ++r) {
    for (std::size_t c = 0; c < q_hat.cols(); ++c) {
      if (q_hat(r, c) < 0 || q_hat(r, c) > max) {
        throw CorruptedAggregateError(
            "aggregate entry " + std::to_string(q_hat(r, c)) + " at (" +
            std::to_string(r) + ", " + std::to_string(c) +
            ") is outside [0, " + std::to_string(max) + "]");
      }
    }
  }
  Tensor as_real = Tensor::Matrix(q_hat.rows(), q_hat.cols());
  for (std::size_t i = 0; i < q_hat.size(); ++i) {
    as_real[i] = static_cast<double>(q_hat.values()[i]);
  }
  return PbmEstimateSum(as_real, clients, params);
}

Tensor PbmEstimateSum(const Tensor& q_hat, int clients, const PbmParams& params) {
  params.Validate();
  if (clients < 1) throw ValidationError("PBM estimate: need at least one client");
  const double b = static_cast<double>(params.b);
  const double scale = params.c / (params.beta * b);
  const double center = b * clients / 2.0;
  Tensor out = q_hat;
  for (double& v : out.values()) v = scale * (v - center);
  return out;
}

double PbmEstimatorVariance(const PbmParams& params, int clients) {
  params.Validate();
  return params.c * params.c * clients /
         (4.0 * params.beta * params.beta * static_cast<double>(params.b));
}

}  // namespace vflchain
