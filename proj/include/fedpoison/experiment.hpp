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

// End-to-end experiment: config file -> data -> federated training under
// attack -> per-epoch exposure and utility series on disk.

#ifndef FEDPOISON_EXPERIMENT_HPP_
#define FEDPOISON_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedpoison/attacks.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/federation.hpp"
#include "fedpoison/metrics.hpp"
#include "fedpoison/model.hpp"
#include "fedpoison/parallel.hpp"

namespace fedpoison {

inline constexpr std::string_view kVersion = "fedpoison 0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetKind { kMl1m, kCsv, kSynthetic };

struct ExperimentConfig {
  std::string dataset_path = "ml-1m/ratings.dat";
  DatasetKind dataset_kind = DatasetKind::kMl1m;
  SyntheticSpec synthetic;
  std::uint64_t synthetic_seed = 1;

  HyperParams hyper;
  std::size_t negative_ratio = 4;
  std::size_t num_targets = 1;
  AttackParams attack;  // targets are chosen at run time
  std::size_t epochs = 30;
  std::vector<std::size_t> ks = {5, 10, 20, 30};
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  ParticipationPolicy policy = ParticipationPolicy::batches(10);
  ExecutionMode mode = ExecutionMode::kParallel;

  // Throws ConfigError on a violated invariant.
  void validate() const;
};

// Parses `key = value` lines; '#' starts a comment. Unknown keys, bad values
// and violated invariants raise ConfigError naming the key and line. Keys
// left out keep their defaults.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

// Applies a single `key = value` assignment, as parse_config does.
void set_config_value(ExperimentConfig& config, std::string_view key,
                      std::string_view value);

// Canonical text form; parse_config_text(config_to_text(c)) reproduces c.
std::string config_to_text(const ExperimentConfig& config);

// ceil(rho * num_users) for an active attack, zero otherwise.
std::size_t malicious_count(const ExperimentConfig& config,
                            std::size_t num_users);

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  std::vector<double> exposure;  // mean over targets, one per K
  double hit_ratio = 0.0;        // @10
  double ndcg = 0.0;             // @10
  double loss = 0.0;             // mean benign BCE per pair
  double wall_seconds = 0.0;
  std::size_t benign_participants = 0;
  std::size_t malicious_participants = 0;
  ExposureResult detail;
};

struct RunRecord {
  ExperimentConfig config;
  std::string version{kVersion};
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_malicious = 0;
  std::vector<ItemIndex> targets;
  std::vector<EpochRow> rows;
};

using ProgressCallback = std::function<void(const EpochRow&)>;

InteractionData load_dataset(const ExperimentConfig& config);

// Runs the full pipeline. Errors from any stage are rethrown with context.
RunRecord run_experiment(const ExperimentConfig& config,
                         const ProgressCallback& progress = {});

// Writes metrics.csv, one er@K.dat per K and run_info.txt into `outdir`.
void emit_series(const RunRecord& record, const std::filesystem::path& outdir);

struct MetricsTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

MetricsTable read_metrics_csv(const std::filesystem::path& path);

}  // namespace fedpoison

#endif  // FEDPOISON_EXPERIMENT_HPP_
