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

#ifndef VFLCHAIN_TENSOR_H_
#define VFLCHAIN_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vflchain/errors.h"

namespace vflchain {

std::string ShapeToString(std::span<const std::size_t> shape);

// Dense row-major array of doubles. Most of the code only uses rank 1 and
// rank 2 tensors; rows()/cols() require rank 2.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor Zeros(std::vector<std::size_t> shape);
  static Tensor Matrix(std::size_t rows, std::size_t cols) {
    return Zeros({rows, cols});
  }
  static Tensor Vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  // Copy of the listed rows, in order.
  Tensor GatherRows(std::span<const std::size_t> rows) const;

  bool AllFinite() const;
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

void RequireShape(const Tensor& t, std::span<const std::size_t> expected,
                  const char* what);

// out = a + b, elementwise.
Tensor Add(const Tensor& a, const Tensor& b);

}  // namespace vflchain

#endif  // VFLCHAIN_TENSOR_H_
