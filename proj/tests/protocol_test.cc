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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "test_util.h"
#include "vflchain/errors.h"
#include "vflchain/protocol.h"

namespace vflchain {
namespace {

TrainingConfig SmallConfig(int clients, std::size_t embed = 4) {
  TrainingConfig c;
  c.clients = clients;
  c.epochs = 2;
  c.batch_size = 8;
  c.embedding_dim = embed;
  c.lr = 0.05;
  c.seed = 11;
  c.pbm = {16, 0.1, 1.0};
  return c;
}

TrainingConfig Identity(TrainingConfig c) {
  c.mechanism = Mechanism::kIdentity;
  c.ledger_mode = LedgerMode::kDirect;
  return c;
}

TEST(SampleMinibatch, DeterministicAndCoversEpoch) {
  EXPECT_EQ(SampleMinibatch(3, 5, 40, 10), SampleMinibatch(3, 5, 40, 10));
  std::vector<int> seen(40, 0);
  for (std::int64_t t = 0; t < 4; ++t) {
    const auto batch = SampleMinibatch(3, t, 40, 10);
    EXPECT_EQ(batch.size(), 10u);
    for (auto p : batch) ++seen[p];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  // The next epoch is a fresh permutation.
  EXPECT_NE(SampleMinibatch(3, 4, 40, 10), SampleMinibatch(3, 0, 40, 10));
}

TEST(SampleMinibatch, RaggedLastBatch) {
  EXPECT_EQ(BatchesPerEpoch(45, 10), 5u);
  std::set<std::size_t> all;
  for (std::int64_t t = 0; t < 5; ++t) {
    const auto batch = SampleMinibatch(1, t, 45, 10);
    EXPECT_EQ(batch.size(), t == 4 ? 5u : 10u);
    all.insert(batch.begin(), batch.end());
  }
  EXPECT_EQ(all.size(), 45u);
}

TEST(TrainingConfig, Validation) {
  TrainingConfig c = SmallConfig(3);
  EXPECT_NO_THROW(c.Validate(48));
  c.batch_size = 100;
  EXPECT_THROW(c.Validate(48), ValidationError);
  c = SmallConfig(3);
  c.active_client = 3;
  EXPECT_THROW(c.Validate(48), ValidationError);
  c = SmallConfig(3);
  c.epochs = -1;
  EXPECT_THROW(c.Validate(48), ValidationError);
  c = SmallConfig(3);
  c.pbm.beta = 0.5;
  EXPECT_THROW(c.Validate(48), ValidationError);
}

TEST(Federation, RejectsMismatchedClientCount) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  EXPECT_THROW(Federation(SmallConfig(4), data), ValidationError);
}

TEST(ClientRoundSubmit, PayloadInRangeAndCacheRetained) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  const TrainingConfig config = SmallConfig(3);
  const Federation fed(config, data);
  auto clients = fed.clients();
  auto ledger = std::make_shared<Ledger>();
  LedgerAggregator agg(ledger);
  const std::vector<std::size_t> ids{data.split.train.begin(), data.split.train.begin() + 8};
  agg.BeginRound(0, {8, 4, 16, 3});
  for (auto& c : clients) {
    EXPECT_TRUE(ClientRoundSubmit(c, ids, config, agg, 0).has_value());
    ASSERT_TRUE(c.pending.has_value());
    EXPECT_EQ(c.pending->output, Forward(c.local, c.features.GatherRows(ids)).output);
  }
  const auto result = agg.Finish(0);
  ASSERT_TRUE(result.q_hat.has_value());
  EXPECT_TRUE(ledger->IsSealed(0));
  for (const auto& tx : ledger->blocks()[0].txs) EXPECT_TRUE(tx.payload.InRange(16));
  EXPECT_TRUE(result.q_hat->InRange(16 * 3));
}

TEST(ReconstructEstimate, CenteredIsZeroAndDeterministic) {
  const PbmParams pbm{16, 0.1, 1.0};
  const QuantizedBatch centered(2, 3, std::vector<std::int64_t>(6, 16 * 5 / 2));
  const Tensor h = ReconstructEstimate(centered, 5, pbm);
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
  const QuantizedBatch q(1, 3, {3, 40, 77});
  EXPECT_EQ(ReconstructEstimate(q, 5, pbm), ReconstructEstimate(q, 5, pbm));
}

TEST(LabelholderGradients, CoverageAndLinearity) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 2);
  const TrainingConfig config = Identity(SmallConfig(3));
  const Federation fed(config, data);
  const std::vector<std::size_t> ids{data.split.train.begin(), data.split.train.begin() + 8};
  Tensor h = Tensor::Matrix(8, 4);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = 0.1 * static_cast<double>(i % 7) - 0.3;

  std::vector<SampleGradient> records;
  std::vector<int> covered(8, 0);
  for (const auto& c : fed.clients()) {
    for (auto p : OwnedPositions(c, ids)) ++covered[p];
    auto part = LabelholderGradients(c, ids, OwnedPositions(c, ids), h);
    records.insert(records.end(), part.begin(), part.end());
  }
  for (int k : covered) EXPECT_EQ(k, 1);

  // Averaged per-sample gradients equal one batch backward pass.
  const ActiveStepResult step = ActiveClientStep(records, fed.fusion(), 0.0, 8);
  Tensor labels = Tensor::Matrix(8, 1);
  for (std::size_t i = 0; i < 8; ++i) labels[i] = data.labels[ids[i]];
  const ForwardResult fwd = Forward(fed.fusion(), h);
  const LossAndGrad lg = BceLossAndGrad(fwd.output, labels);
  const BackwardResult bwd = Backward(fed.fusion(), fwd.cache, lg.dloss_dlogits);
  const auto batch = bwd.param_grads.Flatten();
  for (std::size_t k = 0; k < batch.size(); ++k) EXPECT_NEAR(step.fusion_grad[k], batch[k], 1e-15);
  for (std::size_t k = 0; k < h.size(); ++k) {
    EXPECT_NEAR(step.avg_grad[k], bwd.input_grad[k], 1e-15);
  }
  EXPECT_NEAR(step.mean_loss, lg.loss, 1e-14);

  // Someone else's sample is refused.
  const auto& c0 = fed.clients()[0];
  const auto& c1 = fed.clients()[1];
  const auto foreign = OwnedPositions(c1, ids);
  if (!foreign.empty()) {
    const std::vector<std::size_t> one{foreign[0]};
    EXPECT_THROW(LabelholderGradients(c0, ids, one, h), ProtocolError);
  }
}

TEST(LabelholderGradients, SaturatedSampleHasTinyGradient) {
  ClientState c;
  c.id = "client-0";
  RandomStream rng(1);
  c.fusion = MakeFusionModel(2, rng);
  c.fusion.layers[0].weight = Tensor({1, 2}, {50, 50});
  c.fusion.layers[0].bias = Tensor::Vector({0});
  c.labels[7] = 1;
  const std::vector<std::size_t> ids{7};
  const std::vector<std::size_t> pos{0};
  const auto g = LabelholderGradients(c, ids, pos, Tensor({1, 2}, {1, 1}));
  for (double v : g[0].grads.wrt_input) EXPECT_LT(std::abs(v), 1e-30);
}

TEST(ActiveClientStep, ZeroGradientsAndSingleSample) {
  RandomStream rng(3);
  const MlpParams fusion = MakeFusionModel(3, rng);
  std::vector<SampleGradient> zeros(2);
  for (std::size_t i = 0; i < 2; ++i) {
    zeros[i].position = i;
    zeros[i].grads.wrt_input.assign(3, 0.0);
    zeros[i].grads.wrt_fusion_params.assign(fusion.num_parameters(), 0.0);
  }
  const auto r = ActiveClientStep(zeros, fusion, 0.1, 2);
  EXPECT_EQ(r.fusion, fusion);
  for (double v : r.avg_grad.values()) EXPECT_EQ(v, 0.0);

  SampleGradient one;
  one.grads.wrt_input = {1, 2, 3};
  one.grads.wrt_fusion_params.assign(fusion.num_parameters(), 0.5);
  const std::vector<SampleGradient> single{one};
  const auto s = ActiveClientStep(single, fusion, 0.1, 1);
  EXPECT_EQ(s.avg_grad, Tensor({1, 3}, {1, 2, 3}));
  EXPECT_EQ(s.fusion_grad, one.grads.wrt_fusion_params);
}

TEST(ActiveClientStep, RejectsBadCoverage) {
  RandomStream rng(3);
  const MlpParams fusion = MakeFusionModel(2, rng);
  SampleGradient g;
  g.grads.wrt_input = {0, 0};
  g.grads.wrt_fusion_params.assign(fusion.num_parameters(), 0.0);
  const std::vector<SampleGradient> dup{g, g};
  EXPECT_THROW(ActiveClientStep(dup, fusion, 0.1, 2), ProtocolError);
  const std::vector<SampleGradient> missing{g};
  EXPECT_THROW(ActiveClientStep(missing, fusion, 0.1, 2), ProtocolError);
}

TEST(ClientLocalUpdate, ZeroGradientAndMissingCache) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  const TrainingConfig config = Identity(SmallConfig(3));
  const Federation fed(config, data);
  ClientState c = fed.clients()[1];
  EXPECT_THROW(ClientLocalUpdate(c, Tensor::Matrix(8, 4), 0.1), ProtocolError);
  DirectAggregator agg;
  const std::vector<std::size_t> ids{data.split.train.begin(), data.split.train.begin() + 8};
  agg.BeginRound(0, {8, 4, 16, 3});
  ClientRoundSubmit(c, ids, config, agg, 0);
  const MlpParams before = c.local;
  ClientLocalUpdate(c, Tensor::Matrix(8, 4), 0.1);
  EXPECT_EQ(c.local, before);
  EXPECT_FALSE(c.pending.has_value());
}

TEST(Gradients, MatchFiniteDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto data = testing::SyntheticVertical(32, 6, 3, seed);
    TrainingConfig config = Identity(SmallConfig(3));
    config.seed = seed;
    EXPECT_LE(testing::FiniteDifferenceError(data, config), 1e-4) << "seed " << seed;
  }
}

TEST(Gradients, MatchFiniteDifferencesSingleClient) {
  const auto data = testing::SyntheticVertical(32, 5, 1, 4);
  EXPECT_LE(testing::FiniteDifferenceError(data, Identity(SmallConfig(1))), 1e-4);
}

TEST(Federation, MatchesCentralizedTraining) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 5);
  EXPECT_LE(testing::TrajectoryDeviation(data, Identity(SmallConfig(3)), 2), 1e-12);
}

TEST(Federation, SingleClientMatchesEndToEndBackprop) {
  const auto data = testing::SyntheticVertical(64, 5, 1, 6);
  EXPECT_LE(testing::TrajectoryDeviation(data, Identity(SmallConfig(1)), 2), 1e-12);
}

TEST(Federation, ReplicasStayConsistentUnderPbm) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 7);
  Federation fed(SmallConfig(3), data);
  for (std::int64_t t = 0; t < 6; ++t) {
    const RoundTrace trace = fed.RunRound(t);
    EXPECT_EQ(trace.tx_hashes.size(), 3u);
    for (const auto& c : fed.clients()) EXPECT_EQ(c.fusion, fed.fusion());
    EXPECT_TRUE(fed.ledger()->VerifyRound(t).ok());
  }
}

TEST(RunTraining, ZeroEpochsLeavesInitialization) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  TrainingConfig config = SmallConfig(3);
  config.epochs = 0;
  const Federation fed(config, data);
  const TrainingResult r = RunTraining(config, data);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.rounds, 0);
  EXPECT_EQ(r.fusion, fed.fusion());
  for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(r.local_models[m], fed.clients()[m].local);
  EXPECT_EQ(TotalEpsilon(RealizedPrivacyQuery(config, r, 2.0, 1.0)).epsilon, 0.0);
}

TEST(RunTraining, DeterministicAcrossRunsAndThreading) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  TrainingConfig config = SmallConfig(3);
  const TrainingResult a = RunTraining(config, data);
  const TrainingResult b = RunTraining(config, data);
  config.parallel_clients = false;
  const TrainingResult c = RunTraining(config, data);
  ASSERT_EQ(a.metrics.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_EQ(a.metrics[e].auroc, b.metrics[e].auroc);
    EXPECT_EQ(a.metrics[e].loss, c.metrics[e].loss);
    EXPECT_EQ(a.metrics[e].train_loss, c.metrics[e].train_loss);
  }
  EXPECT_EQ(a.fusion, c.fusion);
  EXPECT_EQ(a.ledger->blocks().back().block_hash, c.ledger->blocks().back().block_hash);
}

TEST(RunTraining, LedgerModeDoesNotChangeResults) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  TrainingConfig config = SmallConfig(3);
  const TrainingResult chain = RunTraining(config, data);
  config.ledger_mode = LedgerMode::kDirect;
  const TrainingResult direct = RunTraining(config, data);
  ASSERT_EQ(chain.traces.size(), direct.traces.size());
  for (std::size_t i = 0; i < chain.traces.size(); ++i) {
    EXPECT_EQ(chain.traces[i].h_hat, direct.traces[i].h_hat);
  }
  EXPECT_EQ(chain.fusion, direct.fusion);
  EXPECT_EQ(direct.ledger, nullptr);

  TrainingConfig npq = Identity(SmallConfig(3));
  const TrainingResult n1 = RunTraining(npq, data);
  npq.ledger_mode = LedgerMode::kOnChain;
  const TrainingResult n2 = RunTraining(npq, data);
  for (std::size_t e = 0; e < n1.metrics.size(); ++e) {
    EXPECT_EQ(n1.metrics[e].auroc, n2.metrics[e].auroc);
    EXPECT_EQ(n1.metrics[e].loss, n2.metrics[e].loss);
  }
}

TEST(RunTraining, LedgerBalancesAndVerification) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  TrainingConfig config = SmallConfig(3);
  config.reward_per_submission = 2;
  const TrainingResult r = RunTraining(config, data);
  ASSERT_NE(r.ledger, nullptr);
  EXPECT_EQ(static_cast<std::int64_t>(r.ledger->blocks().size()), r.rounds);
  for (int m = 0; m < 3; ++m) {
    EXPECT_EQ(r.ledger->BalanceOf(ClientAddress(m)), 2 * r.rounds);
    EXPECT_EQ(r.ledger->tokens().AcceptedSubmissions(ClientAddress(m)), r.rounds);
  }
  for (std::int64_t t = 0; t < r.rounds; ++t) EXPECT_TRUE(r.ledger->VerifyRound(t).ok());
}

TEST(RunTraining, OutOfRangeEmbeddingAbortsRound) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  TrainingConfig config = SmallConfig(3);
  config.local_model.output = Activation::kIdentity;
  config.local_model.hidden = Activation::kIdentity;
  // Scale features so the unbounded embedding leaves [-1, 1].
  VerticalDataset big = data;
  for (auto& f : big.client_features) {
    for (double& v : f.values()) v *= 1000.0;
  }
  EXPECT_THROW(RunTraining(config, big), ProtocolError);
  config.range_policy = RangePolicy::kClamp;
  config.epochs = 1;
  EXPECT_NO_THROW(RunTraining(config, big));
}

TEST(RealizedPrivacyQuery, UsesActualRounds) {
  const auto data = testing::SyntheticVertical(64, 9, 3, 1);
  const TrainingConfig config = SmallConfig(3);
  const TrainingResult r = RunTraining(config, data);
  const RdpQuery q = RealizedPrivacyQuery(config, r, 2.0, 1.0);
  EXPECT_EQ(q.iterations, 2 * static_cast<std::int64_t>(BatchesPerEpoch(48, 8)));
  EXPECT_EQ(q.num_samples, 48);
}

}  // namespace
}  // namespace vflchain
