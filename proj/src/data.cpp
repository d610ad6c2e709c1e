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

#include "fedpoison/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string_view>
#include <unordered_map>

#include "fedpoison/rng.hpp"

namespace fedpoison {
namespace {

constexpr std::size_t kSplitDenominator = 5;  // 4:1 train:test

std::vector<std::string_view> split_fields(std::string_view line,
                                           std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

DataError line_error(std::size_t line_no, const std::string& what) {
  return DataError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::size_t InteractionData::total_positives() const {
  std::size_t n = 0;
  for (const auto& t : train) n += t.size();
  for (const auto& t : test) n += t.size();
  return n;
}

std::size_t InteractionData::total_train() const {
  std::size_t n = 0;
  for (const auto& t : train) n += t.size();
  return n;
}

void InteractionData::recount() {
  item_counts.assign(num_items, 0);
  for (const auto& items : train) {
    for (ItemIndex i : items) ++item_counts[i];
  }
}

double InteractionData::mean_train_profile() const {
  if (num_users == 0) return 0.0;
  return static_cast<double>(total_train()) / static_cast<double>(num_users);
}

InteractionData load_interactions(const std::filesystem::path& path,
                                  DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string_view sep = format == DatasetFormat::kMl1m ? "::" : ",";

  InteractionData data;
  std::unordered_map<std::int64_t, UserIndex> user_index;
  std::unordered_map<std::int64_t, ItemIndex> item_index;

  std::string line;
  std::size_t line_no = 0;
  bool seen_record = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, sep);

    std::int64_t user_id = 0;
    std::int64_t item_id = 0;
    double rating = 0.0;
    const bool numeric_head = fields.size() >= 1 && parse_number(fields[0], user_id);
    if (!seen_record && format == DatasetFormat::kCsv && !numeric_head) {
      seen_record = true;  // header
      continue;
    }
    seen_record = true;
    if (fields.size() != 4) {
      throw line_error(line_no, "expected 4 fields, found " +
                                    std::to_string(fields.size()));
    }
    if (!numeric_head) throw line_error(line_no, "unparsable user id");
    if (!parse_number(fields[1], item_id)) {
      throw line_error(line_no, "unparsable item id");
    }
    if (!parse_number(fields[2], rating)) {
      throw line_error(line_no, "unparsable rating");
    }
    // The timestamp is carried by the format but unused.
    if (fields[3].empty()) throw line_error(line_no, "empty timestamp");

    auto [uit, new_user] = user_index.try_emplace(
        user_id, static_cast<UserIndex>(data.user_ids.size()));
    if (new_user) {
      data.user_ids.push_back(user_id);
      data.train.emplace_back();
    }
    auto [iit, new_item] = item_index.try_emplace(
        item_id, static_cast<ItemIndex>(data.item_ids.size()));
    if (new_item) data.item_ids.push_back(item_id);
    // Any rating counts as an implicit positive.
    data.train[uit->second].push_back(iit->second);
  }
  if (data.user_ids.empty()) {
    throw DataError(path.string() + ": no interactions");
  }

  data.num_users = data.user_ids.size();
  data.num_items = data.item_ids.size();
  data.test.assign(data.num_users, {});
  for (auto& items : data.train) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  data.recount();
  return data;
}

InteractionData split_per_user(const InteractionData& data, std::uint64_t seed) {
  InteractionData out = data;
  for (UserIndex u = 0; u < data.num_users; ++u) {
    std::vector<ItemIndex> all = data.train[u];
    all.insert(all.end(), data.test[u].begin(), data.test[u].end());
    std::sort(all.begin(), all.end());

    const std::size_t n_test = all.size() / kSplitDenominator;
    std::vector<ItemIndex> test;
    if (n_test > 0) {
      Engine rng = make_engine(seed, Stream::kSplit, u);
      std::sample(all.begin(), all.end(), std::back_inserter(test), n_test, rng);
    }
    std::vector<ItemIndex> train;
    std::set_difference(all.begin(), all.end(), test.begin(), test.end(),
                        std::back_inserter(train));
    out.train[u] = std::move(train);
    out.test[u] = std::move(test);
  }
  out.recount();
  return out;
}

TrainingSet sample_training_set(std::span<const ItemIndex> positives,
                                std::size_t num_items, std::size_t ratio,
                                std::uint64_t seed) {
  if (ratio < 1) throw std::invalid_argument("negative ratio must be >= 1");
  TrainingSet set;
  set.num_positives = positives.size();
  set.pairs.reserve(positives.size() * (ratio + 1));
  for (ItemIndex i : positives) set.pairs.push_back({i, 1});

  std::vector<ItemIndex> candidates;
  candidates.reserve(num_items);
  auto pos = positives.begin();
  for (ItemIndex i = 0; i < num_items; ++i) {
    while (pos != positives.end() && *pos < i) ++pos;
    if (pos != positives.end() && *pos == i) continue;
    candidates.push_back(i);
  }

  const std::size_t wanted = ratio * positives.size();
  if (candidates.size() < wanted) {
    set.degenerate = true;
    for (ItemIndex i : candidates) set.pairs.push_back({i, 0});
    return set;
  }
  std::vector<ItemIndex> negatives;
  negatives.reserve(wanted);
  Engine rng(seed);
  std::sample(candidates.begin(), candidates.end(),
              std::back_inserter(negatives), wanted, rng);
  for (ItemIndex i : negatives) set.pairs.push_back({i, 0});
  return set;
}

TrainingSet sample_negatives(UserIndex user, const InteractionData& data,
                             std::size_t ratio, std::uint64_t seed,
                             std::size_t epoch) {
  if (user >= data.num_users) {
    throw std::out_of_range("user index " + std::to_string(user) +
                            " out of range");
  }
  return sample_training_set(data.train[user], data.num_items, ratio,
                             derive_seed(seed, Stream::kNegatives, epoch, user));
}

std::vector<ItemIndex> select_target_items(const InteractionData& data,
                                           std::size_t count) {
  if (count > data.num_items) {
    throw std::invalid_argument("cannot select more targets than items");
  }
  std::vector<ItemIndex> order(data.num_items);
  std::iota(order.begin(), order.end(), ItemIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) {
    return data.item_counts[a] < data.item_counts[b];
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

InteractionData make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.num_users == 0 || spec.num_items == 0 ||
      spec.min_profile > spec.max_profile || spec.max_profile > spec.num_items ||
      spec.min_profile == 0) {
    throw std::invalid_argument("invalid synthetic dataset shape");
  }
  Engine rng = make_engine(seed, Stream::kSynthetic);

  std::vector<ItemIndex> rank_to_item(spec.num_items);
  std::iota(rank_to_item.begin(), rank_to_item.end(), ItemIndex{0});
  std::shuffle(rank_to_item.begin(), rank_to_item.end(), rng);
  std::vector<double> base_weight(spec.num_items);
  for (std::size_t r = 0; r < spec.num_items; ++r) {
    base_weight[rank_to_item[r]] =
        std::pow(static_cast<double>(r + 1), -spec.exponent);
  }

  InteractionData data;
  data.num_users = spec.num_users;
  data.num_items = spec.num_items;
  data.train.resize(spec.num_users);
  data.test.resize(spec.num_users);
  std::uniform_int_distribution<std::size_t> profile(spec.min_profile,
                                                     spec.max_profile);
  for (auto& items : data.train) {
    const std::size_t size = profile(rng);
    std::vector<double> weight = base_weight;
    for (std::size_t k = 0; k < size; ++k) {
      std::discrete_distribution<std::size_t> pick(weight.begin(), weight.end());
      const std::size_t i = pick(rng);
      weight[i] = 0.0;
      items.push_back(static_cast<ItemIndex>(i));
    }
    std::sort(items.begin(), items.end());
  }
  data.user_ids.resize(spec.num_users);
  data.item_ids.resize(spec.num_items);
  std::iota(data.user_ids.begin(), data.user_ids.end(), std::int64_t{1});
  std::iota(data.item_ids.begin(), data.item_ids.end(), std::int64_t{1});
  data.recount();
  return data;
}

void write_interactions_csv(const InteractionData& data,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "user,item,rating,timestamp\n";
  for (UserIndex u = 0; u < data.num_users; ++u) {
    std::vector<ItemIndex> all = data.train[u];
    all.insert(all.end(), data.test[u].begin(), data.test[u].end());
    std::sort(all.begin(), all.end());
    for (ItemIndex i : all) {
      out << data.user_ids[u] << ',' << data.item_ids[i] << ",1,0\n";
    }
  }
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace fedpoison
