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

// Malicious client behaviour. The attacker only ever sees the broadcast
// shared parameters; benign embeddings are approximated by Gaussian samples
// (random approximation), optionally pushed toward users that score the
// target low (hard user mining) before the promotion gradient is taken.

#ifndef FEDPOISON_ATTACKS_HPP_
#define FEDPOISON_ATTACKS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedpoison/client.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/model.hpp"
#include "fedpoison/rng.hpp"

namespace fedpoison {

enum class AttackKind {
  kNone,
  kRandom,                // RA: fake users with target + random filler items
  kExplicitBoost,         // EB: promotion loss on the attacker's own embedding
  kRandomApproximation,   // A-ra
  kHardUserMining,        // A-hum
};

std::string_view to_string(AttackKind kind);
// Accepts none, ra, eb, a_ra, a_hum. Throws std::invalid_argument otherwise.
AttackKind parse_attack_kind(std::string_view name);

struct AttackParams {
  AttackKind kind = AttackKind::kNone;
  std::vector<ItemIndex> targets;
  std::size_t num_approx = 10;     // approximated embeddings per target
  double sigma = 0.01;             // std-dev of each approximated entry
  double mining_lr = 0.001;
  std::size_t mining_steps = 30;
  double poison_scale = 1.0;       // multiplier on poisoned uploads
  double malicious_fraction = 0.005;

  void validate(std::size_t num_items) const;
};

struct ApproxEmbedding {
  UserEmbedding embedding;
  ItemIndex target = 0;
};

// n vectors with i.i.d. N(0, sigma^2) entries, drawn row by row from `rng`.
std::vector<UserEmbedding> draw_approx_embeddings(std::size_t n,
                                                  std::size_t embed_dim,
                                                  double sigma, Engine& rng);

// (1/n) * sum over `samples` of -log score(p, target), and its gradient with
// respect to the shared parameters (embeddings held constant).
struct PromotionLoss {
  double value = 0.0;
  GradientUpdate gradient;
};
PromotionLoss promotion_loss(const GlobalParams& params,
                             std::span<const ApproxEmbedding> samples,
                             std::size_t num_approx);

// A-ra: poison_scale * gradient of the promotion loss over n shared Gaussian
// samples paired with every target.
GradientUpdate a_ra_update(const GlobalParams& params,
                           const AttackParams& attack, std::uint64_t seed);

// l_i(p) = -log(1 - score(p, target)).
double hard_user_loss(std::span<const double> user, ItemIndex target,
                      const GlobalParams& params);

// `steps` iterations of p <- p - mining_lr * dl_i/dp with params fixed.
ApproxEmbedding mine_hard_user(const GlobalParams& params, ItemIndex target,
                               UserEmbedding init, double mining_lr,
                               std::size_t steps);

// A-hum: the same Gaussian draws as a_ra_update() for the same seed; each
// target mines its own copy of every draw before the promotion gradient is
// taken. With mining_steps == 0 the result equals a_ra_update() bit for bit.
GradientUpdate a_hum_update(const GlobalParams& params,
                            const AttackParams& attack, std::uint64_t seed);

// Random-attack fake users: positives are the targets plus F filler items
// drawn uniformly from non-targets, F = round(mean train profile) - |targets|
// (clamped at 0). Indices run from `first_index`.
std::vector<ClientState> ra_make_fake_clients(const InteractionData& data,
                                              const AttackParams& attack,
                                              std::size_t count,
                                              UserIndex first_index,
                                              std::size_t embed_dim,
                                              std::uint64_t seed);

struct EbResult {
  GradientUpdate upload;
  double loss = 0.0;
};

// Explicit boosting: loss sum_i -log score(p_u, target_i) on the malicious
// client's own persistent embedding. Uploads poison_scale * grad of the
// shared parameters and takes a local step on p_u.
EbResult eb_update(const GlobalParams& params, ClientState& client,
                   const AttackParams& attack, double learning_rate);

// Round-level inputs a malicious client needs besides the broadcast.
struct MaliciousContext {
  std::size_t num_items = 0;
  std::size_t negative_ratio = 4;
  double learning_rate = 0.001;
  std::uint64_t master_seed = 0;
  std::size_t round = 0;
};

// Dispatches on attack.kind. RA fakes train like benign clients on their
// synthetic profile.
GradientUpdate malicious_client_step(ClientState& client,
                                     const GlobalParams& params,
                                     const AttackParams& attack,
                                     const MaliciousContext& context);

// Clients for indices [first_index, first_index + count). RA gets fake
// profiles; the other kinds get an empty profile and a fresh embedding.
std::vector<ClientState> make_malicious_clients(const InteractionData& data,
                                                const AttackParams& attack,
                                                std::size_t count,
                                                UserIndex first_index,
                                                std::size_t embed_dim,
                                                std::uint64_t master_seed);

}  // namespace fedpoison

#endif  // FEDPOISON_ATTACKS_HPP_
