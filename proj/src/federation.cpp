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

#include "fedpoison/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iterator>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include "fedpoison/rng.hpp"

namespace fedpoison {
namespace {

struct Outcome {
  GradientUpdate upload;
  double loss = 0.0;
  std::size_t pairs = 0;
  bool degenerate = false;
};

}  // namespace

std::vector<UserIndex> select_participants(std::size_t epoch,
                                           const ParticipationPolicy& policy,
                                           std::size_t num_clients,
                                           std::uint64_t seed) {
  std::vector<UserIndex> all(num_clients);
  std::iota(all.begin(), all.end(), UserIndex{0});
  if (policy.kind != ParticipationPolicy::Kind::kFraction || num_clients == 0) {
    return all;
  }
  if (!(policy.fraction > 0.0 && policy.fraction <= 1.0)) {
    throw std::invalid_argument("participation fraction must lie in (0, 1]");
  }
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::llround(policy.fraction * static_cast<double>(num_clients))),
      1, num_clients);
  std::vector<UserIndex> chosen;
  chosen.reserve(count);
  Engine rng = make_engine(seed, Stream::kSelection, epoch);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
  return chosen;
}

std::vector<std::vector<UserIndex>> epoch_schedule(
    std::size_t epoch, const ParticipationPolicy& policy,
    std::size_t num_clients, std::uint64_t seed) {
  if (policy.kind != ParticipationPolicy::Kind::kBatches) {
    return {select_participants(epoch, policy, num_clients, seed)};
  }
  if (policy.batch_size == 0) {
    throw std::invalid_argument("clients per round must be positive");
  }
  std::vector<UserIndex> order(num_clients);
  std::iota(order.begin(), order.end(), UserIndex{0});
  Engine rng = make_engine(seed, Stream::kSelection, epoch);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<UserIndex>> rounds;
  for (std::size_t begin = 0; begin < num_clients; begin += policy.batch_size) {
    const std::size_t end = std::min(num_clients, begin + policy.batch_size);
    std::vector<UserIndex> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(batch.begin(), batch.end());
    rounds.push_back(std::move(batch));
  }
  if (rounds.empty()) rounds.emplace_back();
  return rounds;
}

Server::Server(GlobalParams initial)
    : params_(std::move(initial)), pending_(params_.zeros_like()) {}

void Server::begin_round() {
  pending_ = params_.zeros_like();
  open_ = true;
}

void Server::receive(const GradientUpdate& update) {
  if (!open_) throw std::logic_error("receive() outside of a round");
  accumulate(pending_, update);
}

double Server::finish_round(double learning_rate) {
  if (!open_) throw std::logic_error("finish_round() without begin_round()");
  open_ = false;
  params_ = apply_update(std::move(params_), pending_, learning_rate);
  ++round_;
  return std::sqrt(pending_.squared_norm());
}

std::vector<ClientState> make_benign_clients(const InteractionData& data,
                                             std::size_t embed_dim,
                                             std::uint64_t master_seed) {
  std::vector<ClientState> clients(data.num_users);
  for (UserIndex u = 0; u < data.num_users; ++u) {
    clients[u].index = u;
    clients[u].role = ClientRole::kBenign;
    clients[u].embedding = init_user_embedding(
        embed_dim, derive_seed(master_seed, Stream::kUserInit, u));
    clients[u].positives = data.train[u];
  }
  return clients;
}

Simulation::Simulation(Server server, std::vector<ClientState> clients,
                       const InteractionData& data, AttackParams attack,
                       FederationConfig config)
    : server_(std::move(server)),
      clients_(std::move(clients)),
      data_(&data),
      attack_(std::move(attack)),
      config_(config) {
  for (std::size_t k = 0; k < clients_.size(); ++k) {
    if (clients_[k].index != k) {
      throw std::invalid_argument("client " + std::to_string(k) +
                                  " has mismatched index");
    }
  }
  if (config_.block_size == 0) config_.block_size = 1;
}

RoundReport Simulation::run_round(std::span<const UserIndex> participants) {
  const auto start = std::chrono::steady_clock::now();
  RoundReport report;
  report.round = server_.round();
  const std::size_t round = report.round;
  for (std::size_t k = 0; k < participants.size(); ++k) {
    if (participants[k] >= clients_.size() ||
        (k > 0 && participants[k] <= participants[k - 1])) {
      throw std::invalid_argument(
          "participants must be ascending, distinct and in range");
    }
  }
  const GlobalParams& broadcast = server_.broadcast();
  const MaliciousContext context{data_->num_items, config_.negative_ratio,
                                 config_.learning_rate, config_.seed, round};

  auto step = [&](ClientState& client) {
    Outcome out;
    if (client.role == ClientRole::kBenign) {
      const TrainingSet training = sample_training_set(
          client.positives, data_->num_items, config_.negative_ratio,
          derive_seed(config_.seed, Stream::kNegatives, round, client.index));
      ClientStepResult r =
          benign_client_step(client, training, broadcast, config_.learning_rate);
      out.upload = std::move(r.upload);
      out.loss = r.loss;
      out.pairs = r.num_pairs;
      out.degenerate = training.degenerate;
    } else {
      out.upload = malicious_client_step(client, broadcast, attack_, context);
    }
    return out;
  };

  server_.begin_round();
  std::vector<std::optional<Outcome>> block;
  std::vector<std::exception_ptr> errors;
  for (std::size_t begin = 0; begin < participants.size();
       begin += config_.block_size) {
    const std::size_t end =
        std::min(participants.size(), begin + config_.block_size);
    const auto n = static_cast<std::ptrdiff_t>(end - begin);
    block.assign(end - begin, std::nullopt);
    errors.assign(end - begin, nullptr);

    if (config_.mode == ExecutionMode::kParallel) {
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
          block[k] = step(clients_[participants[begin + k]]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    } else {
      for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
          block[k] = step(clients_[participants[begin + k]]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    }

    // Fold in ascending client order so the sum is independent of scheduling.
    for (std::size_t k = 0; k < block.size(); ++k) {
      if (errors[k]) std::rethrow_exception(errors[k]);
      const ClientState& client = clients_[participants[begin + k]];
      server_.receive(block[k]->upload);
      if (client.role == ClientRole::kBenign) {
        ++report.benign_participants;
        report.benign_loss += block[k]->loss;
        report.benign_pairs += block[k]->pairs;
        report.degenerate_sets += block[k]->degenerate ? 1 : 0;
      } else {
        ++report.malicious_participants;
      }
    }
  }
  report.gradient_norm = server_.finish_round(config_.learning_rate);
  report.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return report;
}

EpochReport Simulation::run_epoch() {
  EpochReport report;
  report.epoch = epoch_;
  const auto schedule =
      epoch_schedule(epoch_, config_.policy, clients_.size(), config_.seed);
  for (const auto& participants : schedule) {
    const RoundReport r = run_round(participants);
    ++report.rounds;
    report.benign_participants += r.benign_participants;
    report.malicious_participants += r.malicious_participants;
    report.max_gradient_norm = std::max(report.max_gradient_norm, r.gradient_norm);
    report.benign_loss += r.benign_loss;
    report.benign_pairs += r.benign_pairs;
    report.degenerate_sets += r.degenerate_sets;
    report.wall_seconds += r.wall_seconds;
  }
  ++epoch_;
  return report;
}

std::vector<EpochReport> Simulation::train(std::size_t epochs,
                                           const EvalHook& hook) {
  std::vector<EpochReport> reports;
  reports.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    reports.push_back(run_epoch());
    if (hook) hook(reports.back(), server_.broadcast(), clients_);
  }
  return reports;
}

}  // namespace fedpoison
