/*
 * Copyright 2026 The fedpoison Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedpoison/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "oracles/reference.hpp"

namespace fedpoison {
namespace {

HyperParams tiny_hyper(std::size_t dim, std::vector<std::size_t> layers) {
  HyperParams h;
  h.embed_dim = dim;
  h.layer_dims = std::move(layers);
  return h;
}

// embed_dim 1, one unit: W = [1 1], b = 0, h = [1].
GlobalParams unit_params() {
  GlobalParams p = GlobalParams::zeros(tiny_hyper(1, {1}), 1);
  p.item_embeddings(0, 0) = 1.0;
  p.layers[0].weights(0, 0) = 1.0;
  p.layers[0].weights(0, 1) = 1.0;
  p.output_weights[0] = 1.0;
  return p;
}

TEST(ForwardTest, AllZeroParametersScoreOneHalf) {
  const GlobalParams p = GlobalParams::zeros(HyperParams{}, 4);
  const ForwardTape tape = forward(UserEmbedding{std::vector<double>(8, 0.0)}, 2, p);
  EXPECT_EQ(tape.score, 0.5);
  EXPECT_EQ(tape.logit, 0.0);
}

TEST(ForwardTest, HandComputedSingleUnit) {
  const ForwardTape tape = forward(UserEmbedding{{1.0}}, 0, unit_params());
  ASSERT_EQ(tape.pre_activations.size(), 1u);
  EXPECT_DOUBLE_EQ(tape.pre_activations[0][0], 2.0);
  EXPECT_DOUBLE_EQ(tape.activations[0][0], 2.0);
  EXPECT_DOUBLE_EQ(tape.logit, 2.0);
  EXPECT_NEAR(tape.score, 0.8808, 1e-4);
  EXPECT_DOUBLE_EQ(tape.score, 1.0 / (1.0 + std::exp(-2.0)));
}

TEST(ForwardTest, DeadFirstLayerGivesOneHalfWhateverH) {
  GlobalParams p = unit_params();
  p.layers[0].bias[0] = -5.0;
  p.output_weights[0] = 123.0;
  EXPECT_EQ(forward(UserEmbedding{{1.0}}, 0, p).score, 0.5);
}

TEST(ForwardTest, TapeCachesConcatenatedInput) {
  std::mt19937_64 rng(3);
  const GlobalParams p = oracle::random_params(tiny_hyper(2, {3, 2}), 3, rng);
  const UserEmbedding u{{0.25, -0.5}};
  const ForwardTape tape = forward(u, 1, p);
  ASSERT_EQ(tape.input.size(), 4u);
  EXPECT_EQ(tape.input[0], 0.25);
  EXPECT_EQ(tape.input[1], -0.5);
  EXPECT_EQ(tape.input[2], p.item_embeddings(1, 0));
  EXPECT_EQ(tape.input[3], p.item_embeddings(1, 1));
  for (std::size_t k = 0; k < tape.activations.size(); ++k) {
    for (std::size_t j = 0; j < tape.activations[k].size(); ++j) {
      EXPECT_EQ(tape.activations[k][j], std::max(0.0, tape.pre_activations[k][j]));
    }
  }
  EXPECT_DOUBLE_EQ(tape.score, oracle::score(u.values, 1, p));
}

TEST(ForwardTest, RejectsBadInputs) {
  const GlobalParams p = GlobalParams::zeros(tiny_hyper(2, {2}), 3);
  EXPECT_THROW(forward(UserEmbedding{{0.0, 0.0}}, 3, p), std::out_of_range);
  EXPECT_THROW(forward(UserEmbedding{{0.0}}, 0, p), ShapeError);
  EXPECT_THROW(forward(UserEmbedding{{0.0, std::nan("")}}, 0, p), NonFiniteError);
  GlobalParams bad = p;
  bad.item_embeddings(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward(UserEmbedding{{0.0, 0.0}}, 1, bad), NonFiniteError);
}

TEST(ForwardTest, ScoreStaysInsideOpenIntervalWhenSaturated) {
  GlobalParams p = unit_params();
  p.output_weights[0] = 1e6;
  const ForwardTape hi = forward(UserEmbedding{{1.0}}, 0, p);
  EXPECT_EQ(hi.logit, kLogitClamp);
  EXPECT_LT(hi.score, 1.0);
  p.output_weights[0] = -1e6;
  const ForwardTape lo = forward(UserEmbedding{{1.0}}, 0, p);
  EXPECT_EQ(lo.logit, -kLogitClamp);
  EXPECT_GT(lo.score, 0.0);
  EXPECT_TRUE(std::isfinite(std::log(lo.score)));
}

TEST(ForwardTest, PredictAndProjectionMatchForwardBitForBit) {
  std::mt19937_64 rng(11);
  const GlobalParams p = oracle::random_params(tiny_hyper(4, {5, 3}), 7, rng);
  const auto user = oracle::random_vector(4, rng);
  const ItemProjection proj(p);
  std::vector<double> all(7);
  proj.score_all(user, p, all);
  for (ItemIndex i = 0; i < 7; ++i) {
    const double f = forward(UserEmbedding{user}, i, p).score;
    EXPECT_EQ(predict(user, i, p), f);
    EXPECT_EQ(all[i], f);
  }
}

TEST(BceLossTest, KnownValues) {
  const ScoredLabel one[] = {{0.5, 1}};
  EXPECT_NEAR(bce_loss(one).value, 0.6931, 1e-4);
  const ScoredLabel two[] = {{0.5, 1}, {0.5, 0}};
  EXPECT_NEAR(bce_loss(two).value, 1.3863, 1e-4);
  const ScoredLabel fwd[] = {{0.8808, 1}};
  EXPECT_NEAR(bce_loss(fwd).value, 0.1269, 1e-4);
}

TEST(BceLossTest, EmptyInputIsFlagged) {
  const LossValue v = bce_loss({});
  EXPECT_EQ(v.value, 0.0);
  EXPECT_TRUE(v.empty_input);
  const ScoredLabel one[] = {{0.5, 1}};
  EXPECT_FALSE(bce_loss(one).empty_input);
}

TEST(BackwardTest, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(5);
  const GlobalParams p = oracle::random_params(tiny_hyper(2, {3, 2}), 3, rng);
  const ForwardTape tape = forward(UserEmbedding{{0.3, -0.2}}, 2, p);
  const ModelGradients g = backward(tape, 0.0, p);
  for (double v : g.grad_p) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_q) EXPECT_EQ(v, 0.0);
  for (double v : g.grad_h) EXPECT_EQ(v, 0.0);
  for (const auto& l : g.grad_layers) {
    for (double v : l.weights.values()) EXPECT_EQ(v, 0.0);
    for (double v : l.bias) EXPECT_EQ(v, 0.0);
  }
}

TEST(BackwardTest, DeadFirstLayerBlocksFlow) {
  GlobalParams p = unit_params();
  p.layers[0].bias[0] = -5.0;
  const ForwardTape tape = forward(UserEmbedding{{1.0}}, 0, p);
  const ModelGradients g = backward(tape, bce_score_gradient(tape.score, 1), p);
  EXPECT_EQ(g.grad_p[0], 0.0);
  EXPECT_EQ(g.grad_q[0], 0.0);
  EXPECT_EQ(g.grad_h[0], 0.0);
  for (double v : g.grad_layers[0].weights.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.grad_layers[0].bias[0], 0.0);
}

TEST(BackwardTest, ReluSubgradientAtZeroIsZero) {
  GlobalParams p = unit_params();
  const ForwardTape tape = forward(UserEmbedding{{-1.0}}, 0, p);  // z = 0
  ASSERT_EQ(tape.pre_activations[0][0], 0.0);
  const ModelGradients g = backward(tape, 1.0, p);
  EXPECT_EQ(g.grad_p[0], 0.0);
  EXPECT_EQ(g.grad_layers[0].bias[0], 0.0);
}

TEST(BackwardTest, RejectsMismatchedTape) {
  std::mt19937_64 rng(2);
  const GlobalParams a = oracle::random_params(tiny_hyper(2, {3}), 3, rng);
  const GlobalParams b = oracle::random_params(tiny_hyper(2, {4}), 3, rng);
  const ForwardTape tape = forward(UserEmbedding{{0.1, 0.2}}, 0, a);
  EXPECT_THROW(backward(tape, 1.0, b), ShapeError);
}

// Single BCE pair: analytic gradients against central differences of the
// reference loss, over random architectures.
TEST(BackwardTest, MatchesFiniteDifferencesOnRandomArchitectures) {
  std::mt19937_64 rng(2024);
  const std::size_t dims[] = {1, 2, 4};
  int checked = 0;
  while (checked < 60) {
    std::uniform_int_distribution<int> pick(0, 2), depth(1, 2), width(1, 5), lab(0, 1);
    std::vector<std::size_t> layers(static_cast<std::size_t>(depth(rng)));
    for (auto& w : layers) w = static_cast<std::size_t>(width(rng));
    const HyperParams h = tiny_hyper(dims[pick(rng)], layers);
    const GlobalParams p = oracle::random_params(h, 3, rng);
    const auto user = oracle::random_vector(h.embed_dim, rng);
    const ItemIndex item = 1;
    const int label = lab(rng);
    const auto trace = oracle::trace_score(user, p.item_embeddings.row(item), p);
    if (trace.min_abs_preactivation < 1e-3 || std::abs(trace.logit) > 25) continue;

    const ForwardTape tape = forward(UserEmbedding{user}, item, p);
    const ModelGradients g = backward(tape, bce_score_gradient(tape.score, label), p);
    GradientUpdate up = GradientUpdate::zeros_for(p);
    up.add(g, item);
    const std::vector<std::pair<ItemIndex, int>> pairs = {{item, label}};
    const auto numeric = oracle::numeric_gradient(
        p, [&](const GlobalParams& q) { return oracle::bce_sum(user, pairs, q); });
    EXPECT_LT(oracle::max_relative_error(oracle::flatten(up, p), numeric), 1e-4);

    const auto numeric_p = oracle::numeric_gradient_vec(
        user, [&](std::span<const double> u) { return oracle::bce_sum(u, pairs, p); });
    EXPECT_LT(oracle::max_relative_error(g.grad_p, numeric_p), 1e-4);
    ++checked;
  }
}

TEST(InitTest, SameSeedIsBitIdentical) {
  const HyperParams h;
  EXPECT_EQ(init_params(h, 50, 9), init_params(h, 50, 9));
  EXPECT_NE(init_params(h, 50, 9), init_params(h, 50, 10));
  EXPECT_EQ(init_user_embedding(8, 4), init_user_embedding(8, 4));
}

TEST(InitTest, ShapesBiasesAndRanges) {
  const HyperParams h;
  const GlobalParams p = init_params(h, 20, 1);
  EXPECT_EQ(p.item_embeddings.rows(), 20u);
  EXPECT_EQ(p.item_embeddings.cols(), 8u);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_EQ(p.layers[0].weights.cols(), 16u);
  EXPECT_EQ(p.layers[0].weights.rows(), 8u);
  EXPECT_EQ(p.output_weights.size(), 8u);
  for (const auto& l : p.layers) {
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    for (double w : l.weights.values()) EXPECT_LE(std::abs(w), limit);
  }
  const double h_limit = std::sqrt(6.0 / 9.0);
  for (double w : p.output_weights) EXPECT_LE(std::abs(w), h_limit);
}

TEST(InitTest, ItemEmbeddingMeanNearZero) {
  const GlobalParams p = init_params(HyperParams{}, 1250, 77);  // 10^4 entries
  const auto v = p.item_embeddings.values();
  ASSERT_EQ(v.size(), 10000u);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 1e4;
  EXPECT_LT(std::abs(mean), 3.0 * (0.01 / 100.0));
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  EXPECT_NEAR(std::sqrt(var / 1e4), 0.01, 0.0005);
}

TEST(ApplyUpdateTest, ZeroGradientLeavesParamsUnchanged) {
  const GlobalParams p = init_params(HyperParams{}, 5, 1);
  EXPECT_EQ(apply_update(p, p.zeros_like(), 0.5), p);
}

TEST(ApplyUpdateTest, UnitRateSubtractsGradient) {
  std::mt19937_64 rng(8);
  const HyperParams h = tiny_hyper(2, {3});
  GlobalParams p = oracle::random_params(h, 4, rng);
  GlobalParams g = oracle::random_params(h, 4, rng);
  GlobalParams out = apply_update(p, g, 1.0);
  std::vector<double> pv, gv, ov;
  oracle::for_each_scalar(p, [&](double& v) { pv.push_back(v); });
  oracle::for_each_scalar(g, [&](double& v) { gv.push_back(v); });
  oracle::for_each_scalar(out, [&](double& v) { ov.push_back(v); });
  for (std::size_t i = 0; i < pv.size(); ++i) EXPECT_EQ(ov[i], pv[i] - gv[i]);
}

TEST(ApplyUpdateTest, OpposingUploadsCancel) {
  std::mt19937_64 rng(4);
  const HyperParams h = tiny_hyper(2, {3});
  const GlobalParams p = oracle::random_params(h, 4, rng);
  const GlobalParams base = oracle::random_params(h, 4, rng);
  const auto user = oracle::random_vector(2, rng);
  const ModelGradients grads = backward(forward(UserEmbedding{user}, 2, base), 0.7, base);
  GradientUpdate plus = GradientUpdate::zeros_for(base);
  GradientUpdate minus = GradientUpdate::zeros_for(base);
  plus.add(grads, 2, 1.0);
  minus.add(grads, 2, -1.0);
  GlobalParams total = p.zeros_like();
  accumulate(total, plus);
  accumulate(total, minus);
  EXPECT_EQ(apply_update(p, total, 0.3), p);
}

TEST(ApplyUpdateTest, NonFiniteGradientNamesTensor) {
  const GlobalParams p = init_params(tiny_hyper(2, {3}), 4, 1);
  GlobalParams g = p.zeros_like();
  g.layers[0].bias[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    apply_update(p, g, 0.1);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("bias"), std::string::npos) << e.what();
  }
}

TEST(GradientUpdateTest, SparseItemRowsAndNorms) {
  std::mt19937_64 rng(6);
  const GlobalParams p = oracle::random_params(tiny_hyper(2, {3}), 6, rng);
  GradientUpdate u = GradientUpdate::zeros_for(p);
  EXPECT_TRUE(u.is_zero());
  const ModelGradients g = backward(forward(UserEmbedding{{0.4, 0.1}}, 4, p), 1.0, p);
  u.add(g, 4);
  EXPECT_EQ(u.item_rows.size(), 1u);
  EXPECT_EQ(u.item_rows.count(4), 1u);
  const double n = u.squared_norm();
  u.scale(2.0);
  EXPECT_DOUBLE_EQ(u.squared_norm(), 4.0 * n);
}

}  // namespace
}  // namespace fedpoison
