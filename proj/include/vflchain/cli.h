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

#ifndef VFLCHAIN_CLI_H_
#define VFLCHAIN_CLI_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vflchain/dataset.h"
#include "vflchain/protocol.h"

namespace vflchain::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitVerification = 2,
  kExitRuntime = 3,
};

enum class Mode { kDp, kNpq };

struct ExperimentConfig {
  TrainingConfig training;
  std::string dataset = "data/breast_cancer.csv";
  std::string label_column = "diagnosis";
  double split = 0.8;
  bool standardize = true;
  PartitionScheme scheme = PartitionScheme::kContiguous;
  std::filesystem::path out_dir = "runs/latest";
  std::vector<std::uint64_t> seeds{0};
  Mode mode = Mode::kDp;
  std::vector<double> alphas{2.0};
  double c0 = 1.0;
  bool write_trace = true;
};

// Loads and partitions the dataset for one seed.
VerticalDataset LoadExperimentData(const ExperimentConfig& config, std::uint64_t seed);

// Effective training config for one seed (mode applied).
TrainingConfig ResolveTraining(const ExperimentConfig& config, std::uint64_t seed);

// Writes metrics.csv, summary.json, trace.ndjson and chain.ndjson (on chain
// only) into out_dir, or into out_dir/seed-<s>/ when several seeds are given.
int CmdTrain(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

int CmdVerify(const std::filesystem::path& chain_log, std::ostream& out,
              std::ostream& err);

struct BudgetArgs {
  std::optional<std::int64_t> iterations;
  std::int64_t epochs = 30;
  std::int64_t batch_size = 10;
  std::int64_t embedding_dim = 16;
  std::int64_t num_samples = 0;  // N; required
  std::int64_t b = 16;
  double beta = 0.1;
  std::vector<double> alphas{2.0};
  double c0 = 1.0;
  std::optional<double> delta;
  bool json = false;
};

int CmdBudget(const BudgetArgs& args, std::ostream& out, std::ostream& err);

struct BenchArgs {
  ExperimentConfig base;
  std::vector<int> clients{5, 10};
  std::vector<std::int64_t> b_values{2, 4, 8, 16};
  int epochs = 10;
};

struct BenchRow {
  int clients = 0;
  std::int64_t b = 0;
  double direct_seconds = 0.0;    // mean per-epoch aggregation time
  double on_chain_seconds = 0.0;
  bool sums_identical = false;
};

std::vector<BenchRow> RunBench(const BenchArgs& args);
int CmdBench(const BenchArgs& args, std::ostream& out, std::ostream& err);

// Entry point used by the vflchain binary.
int Main(int argc, char** argv);

}  // namespace vflchain::cli

#endif  // VFLCHAIN_CLI_H_
