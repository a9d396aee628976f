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

#include "vflchain/protocol.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <spdlog/spdlog.h>

namespace vflchain {
namespace {

using Clock = std::chrono::steady_clock;

Tensor RowAsBatch(const Tensor& m, std::size_t r) {
  auto row = m.row(r);
  return Tensor({1, row.size()}, std::vector<double>(row.begin(), row.end()));
}

Tensor SumInOrder(const std::map<int, Tensor>& parts) {
  Tensor sum;
  for (const auto& [index, t] : parts) sum = sum.size() == 0 ? t : Add(sum, t);
  return sum;
}

}  // namespace

std::string_view ToString(Mechanism m) {
  return m == Mechanism::kPbm ? "pbm" : "identity";
}

std::string_view ToString(LedgerMode m) {
  return m == LedgerMode::kOnChain ? "on_chain" : "direct";
}

LedgerMode ParseLedgerMode(std::string_view name) {
  if (name == "on_chain") return LedgerMode::kOnChain;
  if (name == "direct") return LedgerMode::kDirect;
  throw ValidationError("unknown ledger mode '" + std::string(name) + "'");
}

void TrainingConfig::Validate(std::size_t n_train) const {
  if (clients < 1) throw ValidationError("need at least one client");
  if (active_client < 0 || active_client >= clients) {
    throw ValidationError("active client index out of range");
  }
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (batch_size > n_train) {
    throw ValidationError("batch size " + std::to_string(batch_size) +
                          " exceeds training set size " + std::to_string(n_train));
  }
  if (embedding_dim < 1) throw ValidationError("embedding dimension must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be > 0");
  if (mechanism == Mechanism::kPbm) pbm.Validate();
}

std::string ClientAddress(int index) { return "client-" + std::to_string(index); }

std::size_t BatchesPerEpoch(std::size_t n_train, std::size_t batch_size) {
  if (batch_size == 0) throw ValidationError("batch size must be >= 1");
  return (n_train + batch_size - 1) / batch_size;
}

std::vector<std::size_t> SampleMinibatch(std::uint64_t seed, std::int64_t t,
                                         std::size_t n_train, std::size_t batch_size) {
  if (batch_size < 1 || batch_size > n_train) {
    throw ValidationError("batch size must lie in [1, n_train]");
  }
  if (t < 0) throw ValidationError("round index must be >= 0");
  const std::size_t per_epoch = BatchesPerEpoch(n_train, batch_size);
  const auto epoch = static_cast<std::uint64_t>(t) / per_epoch;
  const std::size_t slot = static_cast<std::size_t>(t) % per_epoch;
  RandomStream rng = RandomStream::Derive(seed, StreamPurpose::kMinibatch, {epoch});
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n_train; i > 1; --i) std::swap(perm[i - 1], perm[rng.Below(i)]);
  const std::size_t begin = slot * batch_size;
  const std::size_t end = std::min(begin + batch_size, n_train);
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin),
          perm.begin() + static_cast<std::ptrdiff_t>(end)};
}

// ---------------------------------------------------------------------------
// Aggregators

void DirectAggregator::BeginRound(std::int64_t t, const RoundSpec& spec) {
  std::lock_guard lock(mu_);
  round_ = t;
  spec_ = spec;
  quantized_.clear();
  exact_.clear();
  elapsed_ = {};
}

std::optional<Digest> DirectAggregator::Submit(std::int64_t t, const std::string& client,
                                               QuantizedBatch q) {
  const auto start = Clock::now();
  std::lock_guard lock(mu_);
  if (t != round_) throw ProtocolError("submission for a round that is not open");
  if (q.rows() != spec_.rows || q.cols() != spec_.cols) {
    throw ProtocolError("release of " + client + " has the wrong shape");
  }
  if (!quantized_.emplace(client, std::move(q)).second) {
    throw ProtocolError(client + " released twice in round " + std::to_string(t));
  }
  elapsed_ += Clock::now() - start;
  return std::nullopt;
}

void DirectAggregator::SubmitExact(std::int64_t t, int client_index, Tensor embedding) {
  const auto start = Clock::now();
  std::lock_guard lock(mu_);
  if (t != round_) throw ProtocolError("submission for a round that is not open");
  if (!exact_.emplace(client_index, std::move(embedding)).second) {
    throw ProtocolError("client released twice in round " + std::to_string(t));
  }
  elapsed_ += Clock::now() - start;
}

EmbeddingAggregator::Result DirectAggregator::Finish(std::int64_t t) {
  const auto start = Clock::now();
  std::lock_guard lock(mu_);
  if (t != round_) throw ProtocolError("finishing a round that is not open");
  const std::size_t got = quantized_.size() + exact_.size();
  if (static_cast<int>(got) != spec_.clients) {
    throw ProtocolError("round " + std::to_string(t) + " has " + std::to_string(got) +
                        " of " + std::to_string(spec_.clients) + " releases");
  }
  Result result;
  if (!quantized_.empty()) {
    QuantizedBatch sum(spec_.rows, spec_.cols);
    for (const auto& [client, q] : quantized_) sum += q;
    result.q_hat = std::move(sum);
  } else {
    result.exact_sum = SumInOrder(exact_);
  }
  elapsed_ += Clock::now() - start;
  times_[t] = elapsed_;
  round_ = -1;
  return result;
}

std::chrono::nanoseconds DirectAggregator::RoundTime(std::int64_t t) const {
  std::lock_guard lock(mu_);
  auto it = times_.find(t);
  return it == times_.end() ? std::chrono::nanoseconds{0} : it->second;
}

void LedgerAggregator::BeginRound(std::int64_t t, const RoundSpec& spec) {
  ledger_->OpenRound(t, spec);
}

std::optional<Digest> LedgerAggregator::Submit(std::int64_t t, const std::string& client,
                                               QuantizedBatch q) {
  return ledger_->Submit(t, client, std::move(q));
}

void LedgerAggregator::SubmitExact(std::int64_t, int, Tensor) {
  throw ProtocolError("the ledger only accepts integer releases");
}

EmbeddingAggregator::Result LedgerAggregator::Finish(std::int64_t t) {
  Result result;
  result.q_hat = ledger_->Aggregate(t).sum;
  return result;
}

std::chrono::nanoseconds LedgerAggregator::RoundTime(std::int64_t t) const {
  return ledger_->TimingOf(t).total();
}

// ---------------------------------------------------------------------------
// Protocol steps

std::optional<Digest> ClientRoundSubmit(ClientState& client,
                                        std::span<const std::size_t> ids,
                                        const TrainingConfig& config,
                                        EmbeddingAggregator& aggregator,
                                        std::int64_t t) {
  const Tensor x = client.features.GatherRows(ids);
  ForwardResult fwd = Forward(client.local, x);
  std::optional<Digest> tx;
  if (config.mechanism == Mechanism::kIdentity) {
    aggregator.SubmitExact(t, client.index, fwd.output);
  } else {
    RandomStream rng = RandomStream::Derive(
        client.seed, StreamPurpose::kPbmTrain,
        {static_cast<std::uint64_t>(client.index), static_cast<std::uint64_t>(t)});
    QuantizedBatch q = PbmQuantizeBatch(fwd.output, config.pbm, rng, config.range_policy);
    tx = aggregator.Submit(t, client.id, std::move(q));
  }
  client.pending = std::move(fwd);
  return tx;
}

Tensor ReconstructEstimate(const QuantizedBatch& q_hat, int clients,
                           const PbmParams& pbm) {
  return PbmEstimateSum(q_hat, clients, pbm);
}

std::vector<std::size_t> OwnedPositions(const ClientState& client,
                                        std::span<const std::size_t> ids) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (client.labels.contains(ids[i])) positions.push_back(i);
  }
  return positions;
}

std::vector<SampleGradient> LabelholderGradients(const ClientState& client,
                                                 std::span<const std::size_t> ids,
                                                 std::span<const std::size_t> positions,
                                                 const Tensor& h_hat) {
  std::vector<SampleGradient> out;
  out.reserve(positions.size());
  for (std::size_t pos : positions) {
    if (pos >= ids.size() || pos >= h_hat.rows()) {
      throw ProtocolError("minibatch position out of range");
    }
    auto it = client.labels.find(ids[pos]);
    if (it == client.labels.end()) {
      throw ProtocolError(client.id + " does not hold the label of sample " +
                          std::to_string(ids[pos]));
    }
    const ForwardResult fwd = Forward(client.fusion, RowAsBatch(h_hat, pos));
    const Tensor label({1, 1}, {static_cast<double>(it->second)});
    const LossAndGrad lg = BceLossAndGrad(fwd.output, label);
    const BackwardResult bwd = Backward(client.fusion, fwd.cache, lg.dloss_dlogits);
    SampleGradient rec;
    rec.position = pos;
    rec.loss = lg.loss;
    rec.grads.wrt_input = bwd.input_grad.values();
    rec.grads.wrt_fusion_params = bwd.param_grads.Flatten();
    out.push_back(std::move(rec));
  }
  return out;
}

ActiveStepResult ActiveClientStep(std::span<const SampleGradient> records,
                                  const MlpParams& fusion, double lr,
                                  std::size_t batch_rows) {
  if (records.size() != batch_rows || batch_rows == 0) {
    throw ProtocolError("active client received " + std::to_string(records.size()) +
                        " gradient records for a batch of " +
                        std::to_string(batch_rows));
  }
  std::vector<const SampleGradient*> by_position(batch_rows, nullptr);
  for (const auto& r : records) {
    if (r.position >= batch_rows || by_position[r.position] != nullptr) {
      throw ProtocolError("gradient records do not cover the batch exactly once");
    }
    by_position[r.position] = &r;
  }
  const std::size_t n_params = fusion.num_parameters();
  const std::size_t p = fusion.in_dim();
  const double inv_b = 1.0 / static_cast<double>(batch_rows);

  ActiveStepResult result;
  result.avg_grad = Tensor::Matrix(batch_rows, p);
  result.fusion_grad.assign(n_params, 0.0);
  for (std::size_t i = 0; i < batch_rows; ++i) {
    const SampleGradient& r = *by_position[i];
    if (r.grads.wrt_input.size() != p || r.grads.wrt_fusion_params.size() != n_params) {
      throw ProtocolError("gradient record has the wrong size");
    }
    for (std::size_t k = 0; k < p; ++k) result.avg_grad(i, k) = r.grads.wrt_input[k] * inv_b;
    for (std::size_t k = 0; k < n_params; ++k) {
      result.fusion_grad[k] += r.grads.wrt_fusion_params[k];
    }
    result.mean_loss += r.loss;
  }
  for (double& g : result.fusion_grad) g *= inv_b;
  result.mean_loss *= inv_b;

  MlpGrads grads = fusion.ZerosLike();
  grads.Unflatten(result.fusion_grad);
  result.fusion = SgdStep(fusion, grads, lr);
  return result;
}

MlpGrads ClientLocalGradient(const ClientState& client, const Tensor& avg_grad) {
  if (!client.pending) {
    throw ProtocolError(client.id + " has no forward cache for this round");
  }
  return Backward(client.local, client.pending->cache, avg_grad).param_grads;
}

void ClientLocalUpdate(ClientState& client, const Tensor& avg_grad, double lr) {
  client.local = SgdStep(client.local, ClientLocalGradient(client, avg_grad), lr);
  client.pending.reset();
}

// ---------------------------------------------------------------------------
// Federation

Federation::Federation(TrainingConfig config, const VerticalDataset& data)
    : config_(std::move(config)),
      train_ids_(data.split.train),
      test_ids_(data.split.test) {
  if (data.num_clients() != config_.clients) {
    throw ValidationError("dataset is partitioned for " +
                          std::to_string(data.num_clients()) + " clients, config has " +
                          std::to_string(config_.clients));
  }
  config_.Validate(train_ids_.size());
  for (std::size_t id : test_ids_) test_labels_.push_back(data.labels[id]);

  RandomStream fusion_rng =
      RandomStream::Derive(config_.seed, StreamPurpose::kModelInit, {0});
  const MlpParams fusion = MakeFusionModel(config_.embedding_dim, fusion_rng);
  for (int m = 0; m < config_.clients; ++m) {
    ClientState c;
    c.index = m;
    c.id = ClientAddress(m);
    c.seed = config_.seed;
    RandomStream rng = RandomStream::Derive(config_.seed, StreamPurpose::kModelInit,
                                            {static_cast<std::uint64_t>(m) + 1});
    const auto idx = static_cast<std::size_t>(m);
    c.local = MakeLocalModel(data.client_features[idx].cols(), config_.embedding_dim,
                             config_.local_model, rng);
    c.columns = data.client_columns[idx];
    c.features = data.client_features[idx];
    c.labels = data.client_labels[idx];
    c.fusion = fusion;
    clients_.push_back(std::move(c));
  }

  const bool on_chain = config_.ledger_mode == LedgerMode::kOnChain &&
                        config_.mechanism == Mechanism::kPbm;
  if (config_.ledger_mode == LedgerMode::kOnChain && !on_chain) {
    spdlog::info("identity releases are real-valued; aggregating off chain");
  }
  if (on_chain) {
    ledger_ = std::make_shared<Ledger>(config_.reward_per_submission);
    ledger_->SetLatencyModel(config_.latency);
    aggregator_ = std::make_unique<LedgerAggregator>(ledger_);
  } else {
    aggregator_ = std::make_unique<DirectAggregator>();
  }
}

std::size_t Federation::rounds_per_epoch() const {
  return BatchesPerEpoch(train_ids_.size(), config_.batch_size);
}

const MlpParams& Federation::fusion() const {
  return clients_[static_cast<std::size_t>(config_.active_client)].fusion;
}

template <typename Fn>
void Federation::ForEachClient(Fn&& fn) {
  if (!config_.parallel_clients || clients_.size() < 2) {
    for (auto& c : clients_) fn(c);
    return;
  }
  std::vector<std::future<void>> jobs;
  jobs.reserve(clients_.size());
  for (auto& c : clients_) {
    jobs.push_back(std::async(std::launch::async, [&fn, &c] { fn(c); }));
  }
  for (auto& j : jobs) j.wait();
  for (auto& j : jobs) j.get();  // rethrows the first failure
}

RoundTrace Federation::RunRound(std::int64_t t) {
  RoundTrace trace;
  trace.t = t;
  trace.epoch = static_cast<int>(static_cast<std::size_t>(t) / rounds_per_epoch());

  // Each client derives the minibatch from the shared seed.
  std::vector<std::vector<std::size_t>> per_client_ids(clients_.size());
  for (const auto& c : clients_) {
    std::vector<std::size_t> ids;
    for (std::size_t pos :
         SampleMinibatch(c.seed, t, train_ids_.size(), config_.batch_size)) {
      ids.push_back(train_ids_[pos]);
    }
    per_client_ids[static_cast<std::size_t>(c.index)] = std::move(ids);
  }
  for (const auto& ids : per_client_ids) {
    if (ids != per_client_ids.front()) {
      throw ProtocolError("round " + std::to_string(t) + ": clients disagree on the minibatch");
    }
  }
  const std::vector<std::size_t>& ids = per_client_ids.front();
  trace.minibatch_ids = ids;

  // Embed, release, aggregate.
  RoundSpec spec{ids.size(), config_.embedding_dim, config_.pbm.b, config_.clients};
  aggregator_->BeginRound(t, spec);
  std::vector<std::optional<Digest>> tx(clients_.size());
  ForEachClient([&](ClientState& c) {
    tx[static_cast<std::size_t>(c.index)] =
        ClientRoundSubmit(c, ids, config_, *aggregator_, t);
  });
  EmbeddingAggregator::Result agg = aggregator_->Finish(t);
  trace.aggregation_time = aggregator_->RoundTime(t);
  for (const auto& h : tx) {
    if (h) trace.tx_hashes.push_back(ToHex(*h));
  }

  // Reconstruct h_hat. Every client computes it from the same sealed
  // sum, so one evaluation stands for all of them.
  trace.h_hat = agg.q_hat ? ReconstructEstimate(*agg.q_hat, config_.clients, config_.pbm)
                          : std::move(*agg.exact_sum);

  // Label holders send per-sample gradients.
  std::vector<SampleGradient> records;
  for (const auto& c : clients_) {
    const auto positions = OwnedPositions(c, ids);
    if (positions.empty()) continue;
    auto part = LabelholderGradients(c, ids, positions, trace.h_hat);
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }

  // Active client averages and updates the fusion model.
  ClientState& active = clients_[static_cast<std::size_t>(config_.active_client)];
  ActiveStepResult step = ActiveClientStep(records, active.fusion, config_.lr, ids.size());
  trace.loss = step.mean_loss;
  trace.avg_grad = step.avg_grad;
  for (auto& c : clients_) c.fusion = step.fusion;

  // Local updates through the straight-through rule.
  ForEachClient([&](ClientState& c) { ClientLocalUpdate(c, step.avg_grad, config_.lr); });
  return trace;
}

MetricReport Federation::Evaluate(int epoch) const {
  MetricReport report;
  report.epoch = epoch;
  if (test_ids_.empty()) return report;

  const bool quantize = config_.mechanism == Mechanism::kPbm && config_.noisy_eval;
  std::map<int, Tensor> exact;
  QuantizedBatch q_hat(test_ids_.size(), config_.embedding_dim);
  for (const auto& c : clients_) {
    Tensor emb = Forward(c.local, c.features.GatherRows(test_ids_)).output;
    if (quantize) {
      RandomStream rng = RandomStream::Derive(
          c.seed, StreamPurpose::kPbmEval,
          {static_cast<std::uint64_t>(c.index), static_cast<std::uint64_t>(epoch)});
      q_hat += PbmQuantizeBatch(emb, config_.pbm, rng, config_.range_policy);
    } else {
      exact.emplace(c.index, std::move(emb));
    }
  }
  const Tensor h_hat = quantize ? ReconstructEstimate(q_hat, config_.clients, config_.pbm)
                                : SumInOrder(exact);
  const Tensor logits = Forward(fusion(), h_hat).output;
  Tensor labels = Tensor::Matrix(test_ids_.size(), 1);
  std::vector<double> scores(test_ids_.size());
  for (std::size_t i = 0; i < test_ids_.size(); ++i) {
    labels[i] = test_labels_[i];
    scores[i] = Sigmoid(logits[i]);
  }
  report.loss = BceLossAndGrad(logits, labels).loss;
  report.auroc = Auroc(scores, test_labels_);
  report.f1 = F1Score(scores, test_labels_);
  return report;
}

TrainingResult RunTraining(const TrainingConfig& config, const VerticalDataset& data,
                           const RunOptions& options) {
  Federation fed(config, data);
  TrainingResult result;
  result.ledger = fed.ledger();
  result.n_train = fed.n_train();
  const int epochs =
      options.max_epochs >= 0 ? std::min(options.max_epochs, config.epochs) : config.epochs;
  const auto per_epoch = static_cast<std::int64_t>(fed.rounds_per_epoch());
  std::int64_t t = 0;
  for (int e = 0; e < epochs; ++e) {
    double loss_sum = 0.0;
    double agg_seconds = 0.0;
    for (std::int64_t k = 0; k < per_epoch; ++k, ++t) {
      RoundTrace trace;
      try {
        trace = fed.RunRound(t);
      } catch (const std::exception& ex) {
        throw ProtocolError("round " + std::to_string(t) + " aborted: " + ex.what());
      }
      loss_sum += trace.loss;
      agg_seconds += std::chrono::duration<double>(trace.aggregation_time).count();
      if (options.on_round) options.on_round(trace);
      if (options.keep_traces) result.traces.push_back(std::move(trace));
    }
    result.epoch_aggregation_seconds.push_back(agg_seconds);
    if (options.evaluate) {
      MetricReport report = fed.Evaluate(e);
      report.train_loss = loss_sum / static_cast<double>(per_epoch);
      result.metrics.push_back(report);
    }
  }
  result.rounds = t;
  for (const auto& c : fed.clients()) result.local_models.push_back(c.local);
  result.fusion = fed.fusion();
  return result;
}

RdpQuery RealizedPrivacyQuery(const TrainingConfig& config, const TrainingResult& result,
                              double alpha, double c0) {
  RdpQuery q;
  q.alpha = alpha;
  q.iterations = result.rounds;
  q.batch_size = static_cast<std::int64_t>(config.batch_size);
  q.embedding_dim = static_cast<std::int64_t>(config.embedding_dim);
  q.num_samples = static_cast<std::int64_t>(result.n_train);
  q.b = config.pbm.b;
  q.beta = config.pbm.beta;
  q.c0 = c0;
  return q;
}

}  // namespace vflchain
