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

#include <cmath>
#include <random>

#include "test_util.h"
#include "vflchain/errors.h"
#include "vflchain/mlp.h"
#include "vflchain/rng.h"
#include "vflchain/tensor.h"

namespace vflchain {
namespace {

using testing::NaiveBackward;
using testing::NaiveForward;

MlpParams SingleLayer(std::vector<double> w, std::size_t out, std::size_t in,
                      Activation act) {
  MlpParams p;
  p.layers.push_back({Tensor({out, in}, std::move(w)), Tensor::Zeros({out}), act});
  return p;
}

Tensor RandomBatch(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t = Tensor::Matrix(rows, cols);
  for (double& v : t.values()) v = u(gen);
  return t;
}

MlpParams RandomNet(std::vector<std::size_t> dims, std::vector<Activation> acts,
                    std::uint64_t seed) {
  RandomStream rng(seed);
  return InitMlp(dims, acts, rng);
}

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
  const std::vector<std::size_t> pick{1, 0};
  EXPECT_EQ(t.GatherRows(pick), Tensor({2, 3}, {4, 5, 6, 1, 2, 3}));
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Add(t, Tensor::Matrix(3, 2)), ShapeError);
  EXPECT_EQ(Add(t, t)(0, 1), 4.0);
}

TEST(Tensor, AllFiniteDetectsNan) {
  Tensor t = Tensor::Matrix(2, 2);
  EXPECT_TRUE(t.AllFinite());
  t(1, 1) = std::nan("");
  EXPECT_FALSE(t.AllFinite());
}

TEST(RandomStream, DerivedStreamsAreReproducibleAndDistinct) {
  auto a = RandomStream::Derive(7, StreamPurpose::kPbmTrain, {1, 2});
  auto b = RandomStream::Derive(7, StreamPurpose::kPbmTrain, {1, 2});
  auto c = RandomStream::Derive(7, StreamPurpose::kPbmTrain, {2, 1});
  auto d = RandomStream::Derive(7, StreamPurpose::kPbmEval, {1, 2});
  const auto x = a.NextU64();
  EXPECT_EQ(x, b.NextU64());
  EXPECT_NE(x, c.NextU64());
  EXPECT_NE(x, d.NextU64());
}

TEST(RandomStream, UniformAndBelowStayInRange) {
  RandomStream r(3);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = r.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hist[r.Below(7)];
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Forward, IdentityLayerPassesInputThrough) {
  const MlpParams p = SingleLayer({1, 0, 0, 1}, 2, 2, Activation::kIdentity);
  const auto out = Forward(p, Tensor({1, 2}, {1, 2})).output;
  EXPECT_EQ(out, Tensor({1, 2}, {1, 2}));
}

TEST(Forward, TanhOfZeroIsZero) {
  const MlpParams p = RandomNet({4, 3}, {Activation::kTanh}, 11);
  MlpParams zero_bias = p;
  for (double& b : zero_bias.layers[0].bias.values()) b = 0.0;
  const auto out = Forward(zero_bias, Tensor::Matrix(5, 4)).output;
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ThreeLayerTanhNetIsBoundedWithExpectedShape) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MlpParams p = RandomNet({6, 3, 16, 16},
                                  {Activation::kRelu, Activation::kTanh, Activation::kTanh}, seed);
    const auto out = Forward(p, RandomBatch(10, 6, seed, 50.0)).output;
    ASSERT_EQ(out.shape(), (std::vector<std::size_t>{10, 16}));
    for (double v : out.values()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Forward, HardTanhOutputIsBounded) {
  const MlpParams p = RandomNet({5, 8}, {Activation::kHardTanh}, 4);
  const auto out = Forward(p, RandomBatch(20, 5, 4, 100.0)).output;
  for (double v : out.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Forward, MatchesPlainLoopReference) {
  const MlpParams p = RandomNet({5, 4, 3}, {Activation::kRelu, Activation::kSigmoid}, 9);
  const Tensor x = RandomBatch(7, 5, 9);
  const auto out = Forward(p, x).output;
  for (std::size_t r = 0; r < 7; ++r) {
    const auto ref = NaiveForward(p, testing::FeatureRow(x, r)).act.back();
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out(r, c), ref[c], 1e-14);
  }
}

TEST(Forward, RejectsWrongInputWidth) {
  const MlpParams p = RandomNet({5, 3}, {Activation::kTanh}, 1);
  EXPECT_THROW(Forward(p, Tensor::Matrix(2, 4)), ShapeError);
}

TEST(Forward, DeterministicForFixedSeed) {
  const MlpParams a = RandomNet({6, 3, 16}, {Activation::kTanh, Activation::kTanh}, 5);
  const MlpParams b = RandomNet({6, 3, 16}, {Activation::kTanh, Activation::kTanh}, 5);
  EXPECT_EQ(a, b);
  const Tensor x = RandomBatch(4, 6, 5);
  EXPECT_EQ(Forward(a, x).output, Forward(b, x).output);
}

TEST(Backward, IdentityJacobian) {
  const MlpParams p = SingleLayer({1, 0, 0, 1}, 2, 2, Activation::kIdentity);
  const auto fwd = Forward(p, Tensor({1, 2}, {3, -1}));
  const auto bwd = Backward(p, fwd.cache, Tensor({1, 2}, {1, 0}));
  EXPECT_EQ(bwd.input_grad, Tensor({1, 2}, {1, 0}));
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const MlpParams p = RandomNet({5, 4, 3}, {Activation::kTanh, Activation::kTanh}, 2);
  const auto fwd = Forward(p, RandomBatch(6, 5, 2));
  const auto bwd = Backward(p, fwd.cache, Tensor::Matrix(6, 3));
  for (double g : bwd.param_grads.Flatten()) EXPECT_EQ(g, 0.0);
  for (double g : bwd.input_grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, RejectsMismatchedCache) {
  const MlpParams p = RandomNet({5, 3}, {Activation::kTanh}, 2);
  const auto fwd = Forward(p, RandomBatch(4, 5, 2));
  EXPECT_THROW(Backward(p, fwd.cache, Tensor::Matrix(3, 3)), ShapeError);
  const MlpParams other = RandomNet({5, 4, 3}, {Activation::kTanh, Activation::kTanh}, 2);
  EXPECT_THROW(Backward(other, fwd.cache, Tensor::Matrix(4, 3)), ShapeError);
}

// Scalar objective sum(out * weights) so every output coordinate matters.
double Objective(const MlpParams& p, const Tensor& x, const Tensor& w) {
  const auto out = Forward(p, x).output;
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

void CheckFiniteDifferences(const std::vector<std::size_t>& dims,
                            const std::vector<Activation>& acts, std::uint64_t seed) {
  const MlpParams p = RandomNet(dims, acts, seed);
  const Tensor x = RandomBatch(4, dims.front(), seed + 100);
  const Tensor w = RandomBatch(4, dims.back(), seed + 200);
  const auto fwd = Forward(p, x);
  const auto bwd = Backward(p, fwd.cache, w);
  const auto analytic = bwd.param_grads.Flatten();
  auto flat = p.Flatten();
  const double h = 1e-5;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    MlpParams plus = p, minus = p;
    auto fp = flat, fm = flat;
    fp[i] += h;
    fm[i] -= h;
    plus.Unflatten(fp);
    minus.Unflatten(fm);
    const double numeric = (Objective(plus, x, w) - Objective(minus, x, w)) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    EXPECT_LE(std::abs(numeric - analytic[i]) / denom, 1e-4) << "parameter " << i;
  }
  // Input gradient too.
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double numeric = (Objective(p, xp, w) - Objective(p, xm, w)) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(bwd.input_grad[i]), 1e-6});
    EXPECT_LE(std::abs(numeric - bwd.input_grad[i]) / denom, 1e-4) << "input " << i;
  }
}

TEST(Backward, MatchesFiniteDifferencesTanh) {
  CheckFiniteDifferences({5, 3, 4, 4}, {Activation::kTanh, Activation::kTanh, Activation::kTanh},
                         1);
}

TEST(Backward, MatchesFiniteDifferencesMixed) {
  CheckFiniteDifferences({3, 6, 2}, {Activation::kSigmoid, Activation::kIdentity}, 2);
  CheckFiniteDifferences({4, 5, 3}, {Activation::kRelu, Activation::kTanh}, 3);
}

TEST(Backward, MatchesPlainLoopReference) {
  const MlpParams p = RandomNet({4, 3, 2}, {Activation::kTanh, Activation::kSigmoid}, 12);
  const Tensor x = RandomBatch(3, 4, 12);
  const Tensor up = RandomBatch(3, 2, 13);
  const auto bwd = Backward(p, Forward(p, x).cache, up);
  MlpParams ref = p.ZerosLike();
  for (std::size_t r = 0; r < 3; ++r) {
    const auto din = NaiveBackward(p, NaiveForward(p, testing::FeatureRow(x, r)),
                                   testing::FeatureRow(up, r), ref);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(bwd.input_grad(r, c), din[c], 1e-14);
  }
  EXPECT_LE(testing::MaxAbsDiff(bwd.param_grads, ref), 1e-14);
}

TEST(Bce, ZeroLogit) {
  const auto pos = BceLossAndGrad(Tensor({1, 1}, {0}), Tensor({1, 1}, {1}));
  EXPECT_NEAR(pos.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(pos.dloss_dlogits[0], -0.5, 1e-15);
  const auto neg = BceLossAndGrad(Tensor({1, 1}, {0}), Tensor({1, 1}, {0}));
  EXPECT_NEAR(neg.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(neg.dloss_dlogits[0], 0.5, 1e-15);
}

TEST(Bce, LargeLogitMatchesDirectEvaluation) {
  const auto r = BceLossAndGrad(Tensor({1, 1}, {10}), Tensor({1, 1}, {1}));
  const double expected = -std::log(1.0 / (1.0 + std::exp(-10.0)));
  EXPECT_NEAR(r.loss, expected, 1e-15);
  EXPECT_NEAR(r.loss, 4.5399e-5, 1e-8);
}

TEST(Bce, StableForExtremeLogits) {
  const auto r = BceLossAndGrad(Tensor({2, 1}, {800, -800}), Tensor({2, 1}, {0, 1}));
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 800.0, 1e-9);
}

TEST(Bce, MeanOverBatchAndGradientScale) {
  const Tensor z({3, 1}, {0.3, -1.2, 2.0});
  const Tensor y({3, 1}, {1, 0, 0});
  const auto r = BceLossAndGrad(z, y);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) expected += testing::NaiveBce(z[i], static_cast<int>(y[i]));
  EXPECT_NEAR(r.loss, expected / 3, 1e-15);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(r.dloss_dlogits[i], (1 / (1 + std::exp(-z[i])) - y[i]) / 3, 1e-15);
  }
}

TEST(Bce, RejectsNonBinaryLabel) {
  EXPECT_THROW(BceLossAndGrad(Tensor({1, 1}, {0}), Tensor({1, 1}, {0.5})), ValidationError);
  EXPECT_THROW(BceLossAndGrad(Tensor({1, 2}, {0, 0}), Tensor({1, 2}, {0, 1})), ShapeError);
}

TEST(Sgd, Examples) {
  const MlpParams p = SingleLayer({1}, 1, 1, Activation::kIdentity);
  MlpGrads g = p.ZerosLike();
  g.layers[0].weight[0] = 2.0;
  EXPECT_DOUBLE_EQ(SgdStep(p, g, 0.1).layers[0].weight[0], 0.8);
  EXPECT_EQ(SgdStep(p, p.ZerosLike(), 0.1), p);
  EXPECT_EQ(SgdStep(p, g, 0.0), p);
  EXPECT_THROW(SgdStep(p, g, -1.0), ValidationError);
  EXPECT_THROW(SgdStep(p, RandomNet({2, 1}, {Activation::kIdentity}, 0), 0.1), ShapeError);
}

TEST(MlpParams, FlattenRoundTrip) {
  MlpParams p = RandomNet({4, 3, 2}, {Activation::kTanh, Activation::kTanh}, 8);
  EXPECT_EQ(p.num_parameters(), 4u * 3 + 3 + 3 * 2 + 2);
  const auto flat = p.Flatten();
  ASSERT_EQ(flat.size(), p.num_parameters());
  EXPECT_EQ(flat[0], p.layers[0].weight(0, 0));
  EXPECT_EQ(flat[12], p.layers[0].bias[0]);
  MlpParams q = p.ZerosLike();
  q.Unflatten(flat);
  EXPECT_EQ(p, q);
  EXPECT_THROW(q.Unflatten(std::vector<double>(3)), ShapeError);
}

TEST(MlpParams, InitBoundsAndModelShapes) {
  RandomStream rng(1);
  const MlpParams local = MakeLocalModel(6, 16, {}, rng);
  ASSERT_EQ(local.layers.size(), 3u);
  EXPECT_EQ(local.in_dim(), 6u);
  EXPECT_EQ(local.layers[0].out_dim(), 3u);
  EXPECT_EQ(local.out_dim(), 16u);
  EXPECT_EQ(local.layers.back().activation, Activation::kTanh);
  for (const auto& layer : local.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    for (double w : layer.weight.values()) EXPECT_LE(std::abs(w), bound);
  }
  const MlpParams fusion = MakeFusionModel(16, rng);
  EXPECT_EQ(fusion.in_dim(), 16u);
  EXPECT_EQ(fusion.out_dim(), 1u);
  EXPECT_EQ(fusion.layers.back().activation, Activation::kIdentity);
}

TEST(Activation, ParseRoundTrip) {
  for (Activation a : {Activation::kIdentity, Activation::kRelu, Activation::kTanh,
                       Activation::kSigmoid, Activation::kHardTanh}) {
    EXPECT_EQ(ParseActivation(ToString(a)), a);
  }
  EXPECT_THROW(ParseActivation("swish"), ValidationError);
}

}  // namespace
}  // namespace vflchain
