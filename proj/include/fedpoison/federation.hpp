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

// Federated training loop: the server broadcasts the shared parameters,
// selected clients compute gradients locally, and the server applies the sum
// of the uploads in ascending client order.

#ifndef FEDPOISON_FEDERATION_HPP_
#define FEDPOISON_FEDERATION_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fedpoison/attacks.hpp"
#include "fedpoison/client.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/model.hpp"
#include "fedpoison/parallel.hpp"

namespace fedpoison {

// Who takes part in each round of an epoch.
//   kAll:      one round per epoch with every client.
//   kFraction: one round per epoch with a uniform sample of the clients.
//   kBatches:  the epoch visits every client once, `batch_size` per round,
//              in a freshly shuffled order.
struct ParticipationPolicy {
  enum class Kind { kAll, kFraction, kBatches };
  Kind kind = Kind::kAll;
  double fraction = 1.0;
  std::size_t batch_size = 0;

  static ParticipationPolicy all() { return {}; }
  static ParticipationPolicy sample(double f) { return {Kind::kFraction, f, 0}; }
  static ParticipationPolicy batches(std::size_t b) {
    return {Kind::kBatches, 1.0, b};
  }
};

// Ascending client indices for a single-round epoch. kFraction draws
// round(f * num_clients) (at least one) clients uniformly; benign and
// malicious clients share the pool. kBatches is treated as kAll here.
std::vector<UserIndex> select_participants(std::size_t epoch,
                                           const ParticipationPolicy& policy,
                                           std::size_t num_clients,
                                           std::uint64_t seed);

// The rounds of epoch `epoch`, each an ascending list of client indices.
std::vector<std::vector<UserIndex>> epoch_schedule(
    std::size_t epoch, const ParticipationPolicy& policy,
    std::size_t num_clients, std::uint64_t seed);

// Holds the shared parameters and nothing client-specific: its only input
// channel is GradientUpdate.
class Server {
 public:
  explicit Server(GlobalParams initial);

  const GlobalParams& broadcast() const { return params_; }
  std::size_t round() const { return round_; }

  void begin_round();
  // Adds one upload to the pending sum. Call in ascending client order.
  void receive(const GradientUpdate& update);
  // params <- params - learning_rate * sum; returns the L2 norm of the sum.
  double finish_round(double learning_rate);

 private:
  GlobalParams params_;
  GlobalParams pending_;
  std::size_t round_ = 0;
  bool open_ = false;
};

struct FederationConfig {
  double learning_rate = 0.001;
  std::size_t negative_ratio = 4;
  ParticipationPolicy policy;
  std::uint64_t seed = 0;
  ExecutionMode mode = ExecutionMode::kParallel;
  // Clients computed concurrently before their uploads are folded in.
  std::size_t block_size = 256;
};

struct RoundReport {
  std::size_t round = 0;  // global round counter, 0-based
  std::size_t benign_participants = 0;
  std::size_t malicious_participants = 0;
  double gradient_norm = 0.0;
  double benign_loss = 0.0;  // summed over benign pairs
  std::size_t benign_pairs = 0;
  std::size_t degenerate_sets = 0;  // training sets short of negatives
  double wall_seconds = 0.0;

  double mean_benign_loss() const {
    return benign_pairs == 0 ? 0.0 : benign_loss / static_cast<double>(benign_pairs);
  }
};

// Totals over the rounds of one epoch.
struct EpochReport {
  std::size_t epoch = 0;  // 0-based
  std::size_t rounds = 0;
  std::size_t benign_participants = 0;
  std::size_t malicious_participants = 0;
  double max_gradient_norm = 0.0;
  double benign_loss = 0.0;
  std::size_t benign_pairs = 0;
  std::size_t degenerate_sets = 0;
  double wall_seconds = 0.0;

  double mean_benign_loss() const {
    return benign_pairs == 0 ? 0.0 : benign_loss / static_cast<double>(benign_pairs);
  }
};

// Benign clients for every user, index == user, with positives = train.
std::vector<ClientState> make_benign_clients(const InteractionData& data,
                                             std::size_t embed_dim,
                                             std::uint64_t master_seed);

class Simulation {
 public:
  // Called after every epoch. `clients` is the simulator's omniscient view,
  // used for evaluation only.
  using EvalHook = std::function<void(const EpochReport&, const GlobalParams&,
                                      std::span<const ClientState> clients)>;

  // clients[k].index must equal k. `data` must outlive the simulation.
  Simulation(Server server, std::vector<ClientState> clients,
             const InteractionData& data, AttackParams attack,
             FederationConfig config);

  // One round with the given ascending participant list.
  RoundReport run_round(std::span<const UserIndex> participants);
  // All rounds of the next epoch under config().policy.
  EpochReport run_epoch();
  std::vector<EpochReport> train(std::size_t epochs, const EvalHook& hook = {});

  const GlobalParams& params() const { return server_.broadcast(); }
  std::span<const ClientState> clients() const { return clients_; }
  const FederationConfig& config() const { return config_; }
  void set_mode(ExecutionMode mode) { config_.mode = mode; }

 private:
  Server server_;
  std::vector<ClientState> clients_;
  const InteractionData* data_;
  AttackParams attack_;
  FederationConfig config_;
  std::size_t epoch_ = 0;
};

}  // namespace fedpoison

#endif  // FEDPOISON_FEDERATION_HPP_
