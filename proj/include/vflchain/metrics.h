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

#ifndef VFLCHAIN_METRICS_H_
#define VFLCHAIN_METRICS_H_

#include <span>

#include "vflchain/errors.h"

namespace vflchain {

class UndefinedMetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Probability that a random positive scores above a random negative, ties
// counting one half. Rank-sum formulation, O(n log n).
double Auroc(std::span<const double> scores, std::span<const int> labels);

// F1 of the positive class with prediction = (score >= threshold). Returns 0
// when there are no true positives.
double F1Score(std::span<const double> scores, std::span<const int> labels,
               double threshold = 0.5);

struct MetricReport {
  int epoch = 0;
  double auroc = 0.0;
  double f1 = 0.0;
  double loss = 0.0;        // mean test BCE
  double train_loss = 0.0;  // mean minibatch loss over the epoch
};

}  // namespace vflchain

#endif  // VFLCHAIN_METRICS_H_
