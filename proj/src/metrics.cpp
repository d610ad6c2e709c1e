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

#include "fedpoison/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

namespace fedpoison {

TopK top_k_from_scores(std::span<const double> scores, std::size_t k,
                       std::span<const ItemIndex> excluded) {
  std::vector<ItemIndex> eligible;
  eligible.reserve(scores.size());
  auto ex = excluded.begin();
  for (ItemIndex i = 0; i < scores.size(); ++i) {
    while (ex != excluded.end() && *ex < i) ++ex;
    if (ex != excluded.end() && *ex == i) continue;
    eligible.push_back(i);
  }
  TopK out;
  if (k > eligible.size()) {
    out.truncated = true;
    k = eligible.size();
  }
  auto better = [&](ItemIndex a, ItemIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k),
                    eligible.end(), better);
  eligible.resize(k);
  out.items = std::move(eligible);
  return out;
}

TopK top_k(std::span<const double> user, const GlobalParams& params,
           std::size_t k, std::span<const ItemIndex> train_positives) {
  std::vector<double> scores(params.num_items());
  for (ItemIndex i = 0; i < scores.size(); ++i) scores[i] = predict(user, i, params);
  return top_k_from_scores(scores, k, train_positives);
}

ExposureValue er_at_k(ItemIndex target,
                      std::span<const std::vector<ItemIndex>> top_lists,
                      const InteractionData& data, std::size_t k) {
  if (top_lists.size() != data.num_users) {
    throw std::invalid_argument("need one ranking per benign user");
  }
  ExposureValue out;
  for (UserIndex u = 0; u < data.num_users; ++u) {
    const auto& train = data.train[u];
    if (std::binary_search(train.begin(), train.end(), target)) continue;
    ++out.eligible;
    const auto& list = top_lists[u];
    const auto end = list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size()));
    if (std::find(list.begin(), end, target) != end) ++out.hits;
  }
  if (out.eligible == 0) {
    out.degenerate = true;
    return out;
  }
  out.ratio = static_cast<double>(out.hits) / static_cast<double>(out.eligible);
  return out;
}

UtilityMetrics utility_metrics(std::span<const std::vector<ItemIndex>> test,
                               std::span<const std::vector<ItemIndex>> top_lists,
                               std::size_t k) {
  if (test.size() != top_lists.size()) {
    throw std::invalid_argument("test sets and rankings differ in length");
  }
  UtilityMetrics m;
  for (std::size_t u = 0; u < test.size(); ++u) {
    const auto& held_out = test[u];
    if (held_out.empty()) continue;
    ++m.users;
    const auto& list = top_lists[u];
    const std::size_t depth = std::min(k, list.size());
    double dcg = 0.0;
    bool hit = false;
    for (std::size_t r = 0; r < depth; ++r) {
      if (std::find(held_out.begin(), held_out.end(), list[r]) != held_out.end()) {
        hit = true;
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, held_out.size()); ++r) {
      idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    m.hit_ratio += hit ? 1.0 : 0.0;
    m.ndcg += idcg > 0.0 ? dcg / idcg : 0.0;
  }
  if (m.users > 0) {
    m.hit_ratio /= static_cast<double>(m.users);
    m.ndcg /= static_cast<double>(m.users);
  }
  return m;
}

std::vector<std::vector<ItemIndex>> rank_benign_users(
    const GlobalParams& params, std::span<const ClientState> clients,
    const InteractionData& data, std::size_t k, ExecutionMode mode) {
  if (clients.size() < data.num_users) {
    throw std::invalid_argument("fewer clients than benign users");
  }
  const ItemProjection projection(params);
  std::vector<std::vector<ItemIndex>> lists(data.num_users);
  std::vector<std::exception_ptr> errors(data.num_users);
  const auto n = static_cast<std::ptrdiff_t>(data.num_users);

  auto rank_one = [&](std::ptrdiff_t u) {
    try {
      const ClientState& client = clients[static_cast<std::size_t>(u)];
      if (client.role != ClientRole::kBenign) {
        throw std::invalid_argument("client for benign user is malicious");
      }
      std::vector<double> scores(params.num_items());
      projection.score_all(client.embedding.values, params, scores);
      lists[u] = top_k_from_scores(scores, k, data.train[u]).items;
    } catch (...) {
      errors[u] = std::current_exception();
    }
  };

  if (mode == ExecutionMode::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t u = 0; u < n; ++u) rank_one(u);
  } else {
    for (std::ptrdiff_t u = 0; u < n; ++u) rank_one(u);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return lists;
}

Evaluation evaluate(const GlobalParams& params,
                    std::span<const ClientState> clients,
                    const InteractionData& data,
                    std::span<const ItemIndex> targets,
                    std::span<const std::size_t> ks, std::size_t utility_k,
                    std::size_t epoch, ExecutionMode mode) {
  std::size_t depth = utility_k;
  for (std::size_t k : ks) depth = std::max(depth, k);
  const auto lists = rank_benign_users(params, clients, data, depth, mode);

  Evaluation eval;
  auto& ex = eval.exposure;
  ex.epoch = epoch;
  ex.ks.assign(ks.begin(), ks.end());
  ex.targets.assign(targets.begin(), targets.end());
  ex.mean.assign(ks.size(), 0.0);
  for (ItemIndex t : targets) {
    std::vector<double> row;
    row.reserve(ks.size());
    for (std::size_t k : ks) row.push_back(er_at_k(t, lists, data, k).ratio);
    ex.per_target.push_back(std::move(row));
  }
  if (!targets.empty()) {
    for (std::size_t c = 0; c < ks.size(); ++c) {
      for (const auto& row : ex.per_target) ex.mean[c] += row[c];
      ex.mean[c] /= static_cast<double>(targets.size());
    }
  }
  eval.utility = utility_metrics(data.test, lists, utility_k);
  return eval;
}

}  // namespace fedpoison
