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

// Poisson Binomial Mechanism: each bounded scalar a in [-C, C] is released as
// a Binomial(b, 1/2 + (beta/C) a) draw. Summing the draws of M parties and
// rescaling gives an unbiased estimate of the sum of the inputs.

#ifndef VFLCHAIN_PBM_H_
#define VFLCHAIN_PBM_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vflchain/errors.h"
#include "vflchain/rng.h"
#include "vflchain/tensor.h"

namespace vflchain {

struct PbmParams {
  std::int64_t b = 16;  // binomial trials per scalar
  double beta = 0.1;    // in (0, 1/4]
  double c = 1.0;       // input bound

  void Validate() const;
};

// How out-of-range inputs are treated.
enum class RangePolicy {
  kStrict,  // throw PbmRangeError
  kClamp,   // clamp to [-C, C] and log a warning
};

class PbmRangeError : public ValidationError {
 public:
  PbmRangeError(const std::string& what, std::size_t row, std::size_t col)
      : ValidationError(what), row_(row), col_(col) {}
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

// An integer aggregate fell outside [0, b*M].
class CorruptedAggregateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// rows x cols matrix of non-negative integer counts. A single client's output
// lies in [0, b]; a sum over M clients in [0, b*M].
class QuantizedBatch {
 public:
  QuantizedBatch() = default;
  QuantizedBatch(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0) {}
  QuantizedBatch(std::size_t rows, std::size_t cols,
                 std::vector<std::int64_t> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  std::int64_t& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  std::vector<std::int64_t>& values() { return values_; }
  const std::vector<std::int64_t>& values() const { return values_; }

  // True when every entry lies in [0, max].
  bool InRange(std::int64_t max) const;

  // Elementwise integer sum; shapes must match.
  QuantizedBatch& operator+=(const QuantizedBatch& other);

  friend bool operator==(const QuantizedBatch&, const QuantizedBatch&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int64_t> values_;
};

// 1/2 + (beta/C) a; requires |a| <= C.
double PbmProbability(double a, const PbmParams& params);

std::int64_t PbmQuantizeScalar(double a, const PbmParams& params,
                               RandomStream& rng,
                               RangePolicy policy = RangePolicy::kStrict);

// Elementwise PbmQuantizeScalar in row-major order.
QuantizedBatch PbmQuantizeBatch(const Tensor& embeddings, const PbmParams& params,
                                RandomStream& rng,
                                RangePolicy policy = RangePolicy::kStrict);

// Noise-free stand-in for PbmQuantizeBatch: the expected count b*p per entry.
Tensor PbmExpectedCounts(const Tensor& embeddings, const PbmParams& params);

// (C / (beta b)) (q_hat - b M / 2), elementwise. Throws
// CorruptedAggregateError when an entry is outside [0, b M].
Tensor PbmEstimateSum(const QuantizedBatch& q_hat, int clients,
                      const PbmParams& params);

// Same estimator applied to real-valued aggregates (e.g. summed expected
// counts). No range check.
Tensor PbmEstimateSum(const Tensor& q_hat, int clients, const PbmParams& params);

// C^2 M / (4 beta^2 b).
double PbmEstimatorVariance(const PbmParams& params, int clients);

}  // namespace vflchain

#endif  // VFLCHAIN_PBM_H_
