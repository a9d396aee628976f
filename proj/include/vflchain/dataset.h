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

#ifndef VFLCHAIN_DATASET_H_
#define VFLCHAIN_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vflchain/errors.h"
#include "vflchain/tensor.h"

namespace vflchain {

class CsvParseError : public ValidationError {
 public:
  CsvParseError(const std::string& what, std::size_t row, std::size_t col)
      : ValidationError(what), row_(row), col_(col) {}
  // 1-based line number and 0-based column of the offending cell.
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

struct RawDataset {
  std::vector<std::string> feature_names;
  Tensor features;          // N x D
  std::vector<int> labels;  // N, each 0 or 1

  std::size_t num_samples() const { return labels.size(); }
  std::size_t num_features() const { return feature_names.size(); }
};

// Comma-separated file with a header row. The label column may hold 0/1 or
// the WDBC codes M (1) / B (0). An "id" column, if present, is dropped.
// Sample IDs are row positions.
RawDataset LoadCsv(const std::filesystem::path& path, std::string_view label_column);

// Standardizes each column to zero mean and unit variance using statistics of
// fit_rows only. Constant columns become zero.
void StandardizeColumns(Tensor& features, std::span<const std::size_t> fit_rows);

struct SplitIds {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Stratified: each class contributes round(fraction * class size) samples to
// the training side.
SplitIds TrainTestSplit(std::span<const int> labels, double train_fraction,
                        std::uint64_t seed);

enum class PartitionScheme { kContiguous, kRoundRobin };

std::string_view ToString(PartitionScheme scheme);
PartitionScheme ParsePartitionScheme(std::string_view name);

// Column indices held by each client. Contiguous blocks differ in size by at
// most one, larger blocks first.
std::vector<std::vector<std::size_t>> PartitionColumns(std::size_t num_features,
                                                       int clients,
                                                       PartitionScheme scheme);

// Owner client of each sample ID: a seeded shuffle dealt round-robin, so
// clients own disjoint, near-equal label sets.
std::vector<int> PartitionLabels(std::size_t num_samples, int clients,
                                 std::uint64_t seed);

struct VerticalDataset {
  std::size_t num_samples = 0;
  std::vector<std::vector<std::size_t>> client_columns;
  std::vector<Tensor> client_features;  // N x D_m
  std::vector<std::map<std::size_t, int>> client_labels;
  std::vector<int> label_owner;  // sample -> client
  SplitIds split;
  // Ground truth for evaluation; never read by protocol participants.
  std::vector<int> labels;

  int num_clients() const { return static_cast<int>(client_features.size()); }

  // Column-wise reassembly of the client partitions (original column order).
  Tensor Reassemble() const;
};

VerticalDataset VerticalPartition(const RawDataset& raw, int clients,
                                  PartitionScheme scheme, std::uint64_t seed,
                                  SplitIds split);

struct PrepareOptions {
  int clients = 5;
  double train_fraction = 0.8;
  bool standardize = true;
  PartitionScheme scheme = PartitionScheme::kContiguous;
  std::uint64_t seed = 0;
};

// Split, standardize on the training rows, then partition.
VerticalDataset PrepareVerticalDataset(RawDataset raw, const PrepareOptions& options);

}  // namespace vflchain

#endif  // VFLCHAIN_DATASET_H_
