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

// fedpoison run <config> [--seed N] [--out DIR] [--epochs N] [--attack KIND]
// fedpoison synth --out FILE [--users N] [--items M] ...

#include <cstdint>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/experiment.hpp"

namespace {

int run_command(const std::string& config_path,
                const std::optional<std::uint64_t>& seed,
                const std::optional<std::string>& out,
                const std::optional<std::size_t>& epochs,
                const std::optional<std::string>& attack, bool quiet) {
  using namespace fedpoison;
  ExperimentConfig config = parse_config(config_path);
  if (seed) config.seed = *seed;
  if (out) config.output_dir = *out;
  if (epochs) set_config_value(config, "epochs", std::to_string(*epochs));
  if (attack) set_config_value(config, "attack", *attack);
  config.validate();

  const RunRecord record = run_experiment(config, [&](const EpochRow& row) {
    if (quiet) return;
    std::cout << "epoch " << std::setw(3) << row.epoch;
    for (std::size_t c = 0; c < config.ks.size(); ++c) {
      std::cout << "  er@" << config.ks[c] << '=' << std::fixed
                << std::setprecision(4) << row.exposure[c];
    }
    std::cout << "  hr@10=" << row.hit_ratio << "  ndcg@10=" << row.ndcg
              << "  loss=" << row.loss << "  (" << std::setprecision(2)
              << row.wall_seconds << " s)" << std::endl;
  });
  emit_series(record, config.output_dir);
  if (!quiet) {
    std::cout << "users=" << record.num_users << " items=" << record.num_items
              << " malicious=" << record.num_malicious << " -> "
              << config.output_dir << std::endl;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated recommendation poisoning simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> epochs;
  std::optional<std::string> attack;
  bool quiet = false;
  run->add_option("config", config_path, "Config file (key = value lines)")
      ->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out, "Override the output directory");
  run->add_option("--epochs", epochs, "Override the number of epochs");
  run->add_option("--attack", attack, "Override the attack: none|ra|eb|a_ra|a_hum");
  run->add_flag("-q,--quiet", quiet, "Suppress per-epoch progress");

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
  fedpoison::SyntheticSpec spec;
  std::string synth_out;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output CSV path")->required();
  synth->add_option("--users", spec.num_users, "Number of users");
  synth->add_option("--items", spec.num_items, "Number of items");
  synth->add_option("--min-profile", spec.min_profile, "Smallest user profile");
  synth->add_option("--max-profile", spec.max_profile, "Largest user profile");
  synth->add_option("--exponent", spec.exponent, "Power-law exponent");
  synth->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, seed, out, epochs, attack, quiet);
    if (*synth) {
      fedpoison::write_interactions_csv(
          fedpoison::make_synthetic(spec, synth_seed), synth_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
