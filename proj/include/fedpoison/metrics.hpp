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

// Top-K ranking, exposure ratio (ER@K) of target items over benign users, and
// hit ratio / NDCG on held-out positives.

#ifndef FEDPOISON_METRICS_HPP_
#define FEDPOISON_METRICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "fedpoison/client.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/model.hpp"
#include "fedpoison/parallel.hpp"

namespace fedpoison {

struct TopK {
  std::vector<ItemIndex> items;  // best first
  bool truncated = false;        // fewer than K eligible items
};

// Ranks every item not in `excluded` (sorted) by descending score, ties by
// ascending index.
TopK top_k_from_scores(std::span<const double> scores, std::size_t k,
                       std::span<const ItemIndex> excluded);

TopK top_k(std::span<const double> user, const GlobalParams& params,
           std::size_t k, std::span<const ItemIndex> train_positives);

struct ExposureValue {
  double ratio = 0.0;
  std::size_t hits = 0;
  std::size_t eligible = 0;
  bool degenerate = false;  // no eligible user
};

// ER@k of `target`: among benign users whose train set lacks the target, the
// fraction whose top-k holds it. top_lists[u] is user u's ranking (at least
// its first k entries are used).
ExposureValue er_at_k(ItemIndex target,
                      std::span<const std::vector<ItemIndex>> top_lists,
                      const InteractionData& data, std::size_t k);

struct ExposureResult {
  std::size_t epoch = 0;
  std::vector<std::size_t> ks;
  std::vector<ItemIndex> targets;
  std::vector<std::vector<double>> per_target;  // [target][k]
  std::vector<double> mean;                     // [k], mean over targets
};

struct UtilityMetrics {
  double hit_ratio = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;  // users with a non-empty test set
};

// Hit ratio (any test positive in the top-k) and binary-relevance NDCG@k,
// averaged over users with a non-empty test set.
UtilityMetrics utility_metrics(std::span<const std::vector<ItemIndex>> test,
                               std::span<const std::vector<ItemIndex>> top_lists,
                               std::size_t k);

// Top-`k` list for every benign user, scored with the user's current local
// embedding. Index u of the result belongs to user u.
std::vector<std::vector<ItemIndex>> rank_benign_users(
    const GlobalParams& params, std::span<const ClientState> clients,
    const InteractionData& data, std::size_t k, ExecutionMode mode);

struct Evaluation {
  ExposureResult exposure;
  UtilityMetrics utility;
};

Evaluation evaluate(const GlobalParams& params,
                    std::span<const ClientState> clients,
                    const InteractionData& data,
                    std::span<const ItemIndex> targets,
                    std::span<const std::size_t> ks, std::size_t utility_k,
                    std::size_t epoch, ExecutionMode mode);

}  // namespace fedpoison

#endif  // FEDPOISON_METRICS_HPP_
