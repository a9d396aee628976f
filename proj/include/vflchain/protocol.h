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

// Serverless vertical federated training with PBM-protected embeddings.
//
// One round t:
//   1. every client derives the same minibatch from the shared seed;
//   2. each client embeds its feature slice, quantizes it with PBM and submits
//      the counts to the aggregator (ledger contract or direct sum);
//   3. the sealed integer sum is read back and every client reconstructs the
//      estimated embedding sum h_hat;
//   4. clients holding labels of batch samples send per-sample gradients of
//      the loss w.r.t. h_hat and the fusion parameters to the active client;
//   5. the active client averages them, updates the fusion model and
//      broadcasts the new fusion parameters and the gradient w.r.t. h_hat;
//   6. each client backpropagates that gradient through its local model,
//      treating quantization and aggregation as the identity.

#ifndef VFLCHAIN_PROTOCOL_H_
#define VFLCHAIN_PROTOCOL_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vflchain/dataset.h"
#include "vflchain/ledger.h"
#include "vflchain/metrics.h"
#include "vflchain/mlp.h"
#include "vflchain/pbm.h"
#include "vflchain/privacy.h"
#include "vflchain/tensor.h"

namespace vflchain {

// kIdentity releases exact embeddings: no noise, no quantization. It is the
// NPQ baseline and the straight-through test double.
enum class Mechanism { kPbm, kIdentity };
enum class LedgerMode { kOnChain, kDirect };

std::string_view ToString(Mechanism m);
std::string_view ToString(LedgerMode m);
LedgerMode ParseLedgerMode(std::string_view name);

struct TrainingConfig {
  int clients = 5;
  int active_client = 0;
  int epochs = 30;
  std::size_t batch_size = 10;
  std::size_t embedding_dim = 16;
  double lr = 0.001;
  PbmParams pbm;
  RangePolicy range_policy = RangePolicy::kStrict;
  Mechanism mechanism = Mechanism::kPbm;
  LedgerMode ledger_mode = LedgerMode::kOnChain;
  LatencyModel latency;
  std::uint64_t seed = 0;
  LocalModelSpec local_model;
  // Evaluate with PBM noise on test embeddings, as in training.
  bool noisy_eval = true;
  // Run per-client phases on worker threads.
  bool parallel_clients = true;
  std::int64_t reward_per_submission = 1;

  void Validate(std::size_t n_train) const;
};

// Ledger address of client m.
std::string ClientAddress(int index);

struct LossGradients {
  std::vector<double> wrt_input;          // length P
  std::vector<double> wrt_fusion_params;  // flattened like MlpParams::Flatten
};

// Gradient record for one minibatch sample, sent to the active client.
struct SampleGradient {
  std::size_t position = 0;  // row within the minibatch
  LossGradients grads;
  double loss = 0.0;
};

struct ClientState {
  int index = 0;
  std::string id;
  std::uint64_t seed = 0;
  MlpParams local;
  std::vector<std::size_t> columns;
  Tensor features;                   // all samples, own columns only
  std::map<std::size_t, int> labels;  // sample id -> label, own samples only
  MlpParams fusion;                  // replica of the shared fusion model
  // Forward pass of the current round, kept for the local update.
  std::optional<ForwardResult> pending;
};

// Positions (indices into the training id list) of minibatch t. Batches slice
// a per-epoch permutation derived from the seed; the last batch of an epoch
// may be short.
std::vector<std::size_t> SampleMinibatch(std::uint64_t seed, std::int64_t t,
                                         std::size_t n_train, std::size_t batch_size);

std::size_t BatchesPerEpoch(std::size_t n_train, std::size_t batch_size);

// Receives one round of client releases and returns their sum.
class EmbeddingAggregator {
 public:
  struct Result {
    std::optional<QuantizedBatch> q_hat;  // PBM releases
    std::optional<Tensor> exact_sum;      // identity releases
  };

  virtual ~EmbeddingAggregator() = default;
  virtual void BeginRound(std::int64_t t, const RoundSpec& spec) = 0;
  // Returns the transaction hash when the release went on chain.
  virtual std::optional<Digest> Submit(std::int64_t t, const std::string& client,
                                       QuantizedBatch q) = 0;
  virtual void SubmitExact(std::int64_t t, int client_index, Tensor embedding) = 0;
  virtual Result Finish(std::int64_t t) = 0;
  // Aggregation time of a finished round, including injected latency.
  virtual std::chrono::nanoseconds RoundTime(std::int64_t t) const = 0;
};

// Off-chain sum held in memory.
class DirectAggregator : public EmbeddingAggregator {
 public:
  void BeginRound(std::int64_t t, const RoundSpec& spec) override;
  std::optional<Digest> Submit(std::int64_t t, const std::string& client,
                               QuantizedBatch q) override;
  void SubmitExact(std::int64_t t, int client_index, Tensor embedding) override;
  Result Finish(std::int64_t t) override;
  std::chrono::nanoseconds RoundTime(std::int64_t t) const override;

 private:
  mutable std::mutex mu_;
  std::int64_t round_ = -1;
  RoundSpec spec_;
  std::map<std::string, QuantizedBatch> quantized_;
  std::map<int, Tensor> exact_;
  std::chrono::nanoseconds elapsed_{0};
  std::map<std::int64_t, std::chrono::nanoseconds> times_;
};

// Submissions become ledger transactions; the sum is read from the sealed
// aggregate record.
class LedgerAggregator : public EmbeddingAggregator {
 public:
  explicit LedgerAggregator(std::shared_ptr<Ledger> ledger) : ledger_(std::move(ledger)) {}
  void BeginRound(std::int64_t t, const RoundSpec& spec) override;
  std::optional<Digest> Submit(std::int64_t t, const std::string& client,
                               QuantizedBatch q) override;
  void SubmitExact(std::int64_t t, int client_index, Tensor embedding) override;
  Result Finish(std::int64_t t) override;
  std::chrono::nanoseconds RoundTime(std::int64_t t) const override;

 private:
  std::shared_ptr<Ledger> ledger_;
};

// Embeds the client's rows for `ids`, keeps the forward cache and releases the
// embedding to the aggregator (PBM-quantized unless the mechanism is
// identity). The PBM stream is derived from (seed, client, t).
std::optional<Digest> ClientRoundSubmit(ClientState& client,
                                        std::span<const std::size_t> ids,
                                        const TrainingConfig& config,
                                        EmbeddingAggregator& aggregator,
                                        std::int64_t t);

// (1/(beta b)) (q_hat - b M / 2) scaled by C.
Tensor ReconstructEstimate(const QuantizedBatch& q_hat, int clients,
                           const PbmParams& pbm);

// Minibatch positions whose labels this client holds.
std::vector<std::size_t> OwnedPositions(const ClientState& client,
                                        std::span<const std::size_t> ids);

// Per-sample gradients for the given positions, computed with the client's
// fusion replica. Throws ProtocolError for a sample whose label the client
// does not hold.
std::vector<SampleGradient> LabelholderGradients(const ClientState& client,
                                                 std::span<const std::size_t> ids,
                                                 std::span<const std::size_t> positions,
                                                 const Tensor& h_hat);

struct ActiveStepResult {
  MlpParams fusion;                 // updated parameters to broadcast
  std::vector<double> fusion_grad;  // mean per-sample fusion gradient
  Tensor avg_grad;  // batch_rows x P; row i = (1/B) dl_i/dh_hat_i
  double mean_loss = 0.0;
};

// Requires exactly one record per minibatch row.
ActiveStepResult ActiveClientStep(std::span<const SampleGradient> records,
                                  const MlpParams& fusion, double lr,
                                  std::size_t batch_rows);

// Gradient of the minibatch loss w.r.t. the client's local parameters, with
// quantization and aggregation treated as the identity.
MlpGrads ClientLocalGradient(const ClientState& client, const Tensor& avg_grad);

// Applies ClientLocalGradient with SGD and drops the round's cache.
void ClientLocalUpdate(ClientState& client, const Tensor& avg_grad, double lr);

struct RoundTrace {
  std::int64_t t = 0;
  int epoch = 0;
  std::vector<std::size_t> minibatch_ids;
  std::vector<std::string> tx_hashes;  // hex, by client index; empty off chain
  Tensor h_hat;
  Tensor avg_grad;
  double loss = 0.0;
  std::chrono::nanoseconds aggregation_time{0};
};

class Federation {
 public:
  Federation(TrainingConfig config, const VerticalDataset& data);

  // Executes round t of the current epoch schedule.
  RoundTrace RunRound(std::int64_t t);

  // Test-set metrics with the current models.
  MetricReport Evaluate(int epoch) const;

  std::size_t n_train() const { return train_ids_.size(); }
  std::size_t rounds_per_epoch() const;
  const TrainingConfig& config() const { return config_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const MlpParams& fusion() const;
  // Null when aggregation is off chain.
  std::shared_ptr<Ledger> ledger() const { return ledger_; }

 private:
  template <typename Fn>
  void ForEachClient(Fn&& fn);

  TrainingConfig config_;
  std::vector<std::size_t> train_ids_;
  std::vector<std::size_t> test_ids_;
  std::vector<int> test_labels_;
  std::vector<ClientState> clients_;
  std::shared_ptr<Ledger> ledger_;
  std::unique_ptr<EmbeddingAggregator> aggregator_;
};

struct TrainingResult {
  std::vector<MlpParams> local_models;
  MlpParams fusion;
  std::vector<MetricReport> metrics;
  std::vector<RoundTrace> traces;
  std::shared_ptr<Ledger> ledger;
  std::int64_t rounds = 0;
  std::size_t n_train = 0;
  std::vector<double> epoch_aggregation_seconds;
};

struct RunOptions {
  bool keep_traces = true;
  // Stop after this many epochs (negative: config.epochs). Used by benchmarks.
  int max_epochs = -1;
  bool evaluate = true;
  // Called after every round, e.g. to stream traces.
  std::function<void(const RoundTrace&)> on_round;
};

TrainingResult RunTraining(const TrainingConfig& config, const VerticalDataset& data,
                           const RunOptions& options = {});

// Privacy query matching a finished run.
RdpQuery RealizedPrivacyQuery(const TrainingConfig& config, const TrainingResult& result,
                              double alpha, double c0);

}  // namespace vflchain

#endif  // VFLCHAIN_PROTOCOL_H_
