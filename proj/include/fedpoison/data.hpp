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

// Implicit-feedback interaction data: loading, per-user train/test split,
// negative sampling and target item selection.

#ifndef FEDPOISON_DATA_HPP_
#define FEDPOISON_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpoison/model.hpp"

namespace fedpoison {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetFormat { kMl1m, kCsv };

struct InteractionData {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  // Per-user positives, sorted ascending. Before split_per_user() every
  // positive lives in `train`.
  std::vector<std::vector<ItemIndex>> train;
  std::vector<std::vector<ItemIndex>> test;
  // Number of users whose train list holds each item.
  std::vector<std::uint32_t> item_counts;
  // Dense index -> id from the source file.
  std::vector<std::int64_t> user_ids;
  std::vector<std::int64_t> item_ids;

  std::size_t total_positives() const;
  std::size_t total_train() const;
  // Recomputes item_counts from train.
  void recount();
  double mean_train_profile() const;
};

// Reads `userId<sep>itemId<sep>rating<sep>timestamp` records; "::" for ml-1m
// and "," for csv (a non-numeric first line is treated as a header). Every
// record becomes a positive; ids are densely re-indexed in order of first
// appearance and duplicate (user, item) records collapse. Errors carry the
// 1-based line number.
InteractionData load_interactions(const std::filesystem::path& path,
                                  DatasetFormat format);

// Moves floor(n / 5) of each user's n positives to test, chosen uniformly
// without replacement from a stream keyed by (seed, user). Users with fewer
// than five positives keep everything in train.
InteractionData split_per_user(const InteractionData& data, std::uint64_t seed);

struct LabeledItem {
  ItemIndex item;
  int label;

  bool operator==(const LabeledItem&) const = default;
};

struct TrainingSet {
  std::vector<LabeledItem> pairs;  // positives first, then negatives
  std::size_t num_positives = 0;
  // Fewer than r negatives per positive were available.
  bool degenerate = false;

  std::size_t num_negatives() const { return pairs.size() - num_positives; }
};

// Positives plus r * |positives| negatives drawn uniformly without
// replacement from items outside `positives` (sorted). The draw is a pure
// function of `seed`.
TrainingSet sample_training_set(std::span<const ItemIndex> positives,
                                std::size_t num_items, std::size_t ratio,
                                std::uint64_t seed);

// Training set for `user` in `epoch`; the stream mixes (seed, epoch, user).
TrainingSet sample_negatives(UserIndex user, const InteractionData& data,
                             std::size_t ratio, std::uint64_t seed,
                             std::size_t epoch);

// The `count` items with the fewest train interactions, ties broken by
// ascending index. Returned ascending.
std::vector<ItemIndex> select_target_items(const InteractionData& data,
                                           std::size_t count);

// Synthetic implicit dataset with power-law item popularity.
struct SyntheticSpec {
  std::size_t num_users = 200;
  std::size_t num_items = 100;
  std::size_t min_profile = 20;
  std::size_t max_profile = 30;
  double exponent = 1.0;  // popularity weight of rank r is (r + 1)^-exponent
};

// All positives land in `train`; call split_per_user() afterwards. Item
// popularity ranks are shuffled so rank does not follow item index.
InteractionData make_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Writes every positive (train and test) as `user,item,1,0` using the stored
// source ids, with a header line.
void write_interactions_csv(const InteractionData& data,
                            const std::filesystem::path& path);

}  // namespace fedpoison

#endif  // FEDPOISON_DATA_HPP_
