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

#include "fedpoison/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>

#include "fedpoison/rng.hpp"

namespace fedpoison {
namespace {

void check_targets(const GlobalParams& params, const AttackParams& attack) {
  for (ItemIndex i : attack.targets) {
    if (i >= params.num_items()) {
      throw std::out_of_range("target item " + std::to_string(i) +
                              " out of range");
    }
  }
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone:
      return "none";
    case AttackKind::kRandom:
      return "ra";
    case AttackKind::kExplicitBoost:
      return "eb";
    case AttackKind::kRandomApproximation:
      return "a_ra";
    case AttackKind::kHardUserMining:
      return "a_hum";
  }
  return "none";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (AttackKind k :
       {AttackKind::kNone, AttackKind::kRandom, AttackKind::kExplicitBoost,
        AttackKind::kRandomApproximation, AttackKind::kHardUserMining}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown attack kind '" + std::string(name) +
                              "' (expected none, ra, eb, a_ra or a_hum)");
}

void AttackParams::validate(std::size_t num_items) const {
  if (num_approx < 1) throw std::invalid_argument("n must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(mining_lr > 0.0)) throw std::invalid_argument("xi must be positive");
  if (!(poison_scale > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(malicious_fraction >= 0.0 && malicious_fraction <= 1.0)) {
    throw std::invalid_argument("rho must lie in [0, 1]");
  }
  if (kind != AttackKind::kNone && targets.empty()) {
    throw std::invalid_argument("attack needs at least one target item");
  }
  for (ItemIndex i : targets) {
    if (i >= num_items) throw std::out_of_range("target item out of range");
  }
}

std::vector<UserEmbedding> draw_approx_embeddings(std::size_t n,
                                                  std::size_t embed_dim,
                                                  double sigma, Engine& rng) {
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<UserEmbedding> out(n);
  for (auto& e : out) {
    e.values.resize(embed_dim);
    for (double& v : e.values) v = gauss(rng);
  }
  return out;
}

PromotionLoss promotion_loss(const GlobalParams& params,
                             std::span<const ApproxEmbedding> samples,
                             std::size_t num_approx) {
  PromotionLoss out;
  out.gradient = GradientUpdate::zeros_for(params);
  const double inv_n = 1.0 / static_cast<double>(num_approx);
  ForwardTape tape;
  ModelGradients grads;
  for (const auto& sample : samples) {
    forward_into(sample.embedding.values, sample.target, params, tape);
    out.value -= inv_n * std::log(tape.score);
    backward_into(tape, -inv_n / tape.score, params, grads);
    out.gradient.add(grads, sample.target);
  }
  return out;
}

GradientUpdate a_ra_update(const GlobalParams& params,
                           const AttackParams& attack, std::uint64_t seed) {
  check_targets(params, attack);
  Engine rng(seed);
  const auto draws = draw_approx_embeddings(attack.num_approx, params.embed_dim(),
                                            attack.sigma, rng);
  std::vector<ApproxEmbedding> samples;
  samples.reserve(attack.targets.size() * draws.size());
  for (ItemIndex target : attack.targets) {
    for (const auto& d : draws) samples.push_back({d, target});
  }
  GradientUpdate g = promotion_loss(params, samples, attack.num_approx).gradient;
  g.scale(attack.poison_scale);
  return g;
}

double hard_user_loss(std::span<const double> user, ItemIndex target,
                      const GlobalParams& params) {
  return -std::log(1.0 - predict(user, target, params));
}

ApproxEmbedding mine_hard_user(const GlobalParams& params, ItemIndex target,
                               UserEmbedding init, double mining_lr,
                               std::size_t steps) {
  ApproxEmbedding out{std::move(init), target};
  ForwardTape tape;
  ModelGradients grads;
  auto& p = out.embedding.values;
  for (std::size_t s = 0; s < steps; ++s) {
    forward_into(p, target, params, tape);
    backward_into(tape, 1.0 / (1.0 - tape.score), params, grads);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= mining_lr * grads.grad_p[j];
  }
  return out;
}

GradientUpdate a_hum_update(const GlobalParams& params,
                            const AttackParams& attack, std::uint64_t seed) {
  check_targets(params, attack);
  Engine rng(seed);
  const auto draws = draw_approx_embeddings(attack.num_approx, params.embed_dim(),
                                            attack.sigma, rng);
  std::vector<ApproxEmbedding> samples;
  samples.reserve(attack.targets.size() * draws.size());
  for (ItemIndex target : attack.targets) {
    for (const auto& d : draws) {
      samples.push_back(mine_hard_user(params, target, d, attack.mining_lr,
                                       attack.mining_steps));
    }
  }
  GradientUpdate g = promotion_loss(params, samples, attack.num_approx).gradient;
  g.scale(attack.poison_scale);
  return g;
}

std::vector<ClientState> ra_make_fake_clients(const InteractionData& data,
                                              const AttackParams& attack,
                                              std::size_t count,
                                              UserIndex first_index,
                                              std::size_t embed_dim,
                                              std::uint64_t seed) {
  std::vector<ItemIndex> targets = attack.targets;
  std::sort(targets.begin(), targets.end());
  std::vector<ItemIndex> fillers;
  for (ItemIndex i = 0; i < data.num_items; ++i) {
    if (!std::binary_search(targets.begin(), targets.end(), i)) fillers.push_back(i);
  }
  const long rounded = std::lround(data.mean_train_profile());
  const std::size_t filler_count = std::min<std::size_t>(
      fillers.size(),
      static_cast<std::size_t>(
          std::max<long>(0, rounded - static_cast<long>(targets.size()))));

  std::vector<ClientState> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const UserIndex index = first_index + static_cast<UserIndex>(k);
    ClientState c;
    c.index = index;
    c.role = ClientRole::kMalicious;
    c.embedding = init_user_embedding(
        embed_dim, derive_seed(seed, Stream::kUserInit, index));
    Engine rng = make_engine(seed, Stream::kFakeUsers, index);
    std::vector<ItemIndex> chosen;
    std::sample(fillers.begin(), fillers.end(), std::back_inserter(chosen),
                filler_count, rng);
    std::merge(chosen.begin(), chosen.end(), targets.begin(), targets.end(),
               std::back_inserter(c.positives));
    out.push_back(std::move(c));
  }
  return out;
}

EbResult eb_update(const GlobalParams& params, ClientState& client,
                   const AttackParams& attack, double learning_rate) {
  check_targets(params, attack);
  EbResult out;
  out.upload = GradientUpdate::zeros_for(params);
  std::vector<double> grad_p(client.embedding.values.size(), 0.0);
  ForwardTape tape;
  ModelGradients grads;
  for (ItemIndex target : attack.targets) {
    forward_into(client.embedding.values, target, params, tape);
    out.loss -= std::log(tape.score);
    backward_into(tape, -1.0 / tape.score, params, grads);
    out.upload.add(grads, target);
    for (std::size_t j = 0; j < grad_p.size(); ++j) grad_p[j] += grads.grad_p[j];
  }
  for (std::size_t j = 0; j < grad_p.size(); ++j) {
    client.embedding.values[j] -= learning_rate * grad_p[j];
  }
  out.upload.scale(attack.poison_scale);
  return out;
}

GradientUpdate malicious_client_step(ClientState& client,
                                     const GlobalParams& params,
                                     const AttackParams& attack,
                                     const MaliciousContext& context) {
  const std::uint64_t seed = derive_seed(context.master_seed, Stream::kAttack,
                                         context.round, client.index);
  switch (attack.kind) {
    case AttackKind::kNone:
      return GradientUpdate::zeros_for(params);
    case AttackKind::kRandom: {
      const TrainingSet training = sample_training_set(
          client.positives, context.num_items, context.negative_ratio,
          derive_seed(context.master_seed, Stream::kNegatives, context.round,
                      client.index));
      return benign_client_step(client, training, params, context.learning_rate)
          .upload;
    }
    case AttackKind::kExplicitBoost:
      return eb_update(params, client, attack, context.learning_rate).upload;
    case AttackKind::kRandomApproximation:
      return a_ra_update(params, attack, seed);
    case AttackKind::kHardUserMining:
      return a_hum_update(params, attack, seed);
  }
  return GradientUpdate::zeros_for(params);
}

std::vector<ClientState> make_malicious_clients(const InteractionData& data,
                                                const AttackParams& attack,
                                                std::size_t count,
                                                UserIndex first_index,
                                                std::size_t embed_dim,
                                                std::uint64_t master_seed) {
  if (attack.kind == AttackKind::kRandom) {
    return ra_make_fake_clients(data, attack, count, first_index, embed_dim,
                                master_seed);
  }
  std::vector<ClientState> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ClientState c;
    c.index = first_index + static_cast<UserIndex>(k);
    c.role = ClientRole::kMalicious;
    c.embedding = init_user_embedding(
        embed_dim, derive_seed(master_seed, Stream::kUserInit, c.index));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace fedpoison
