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

#include "fedpoison/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fedpoison/rng.hpp"

namespace fedpoison {
namespace {

constexpr std::size_t kUtilityK = 10;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

ConfigError bad_value(std::string_view key, std::string_view value,
                      std::string_view expected) {
  return ConfigError("key '" + std::string(key) + "': cannot parse '" +
                     std::string(value) + "' as " + std::string(expected));
}

template <typename T>
T parse_as(std::string_view key, std::string_view value,
           std::string_view expected) {
  T out{};
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw bad_value(key, value, expected);
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  if (!value.empty() && value.front() == '-') {
    throw ConfigError("key '" + std::string(key) + "': must be non-negative, got " +
                      std::string(value));
  }
  return parse_as<std::size_t>(key, value, "a non-negative integer");
}

double parse_real(std::string_view key, std::string_view value) {
  const double v = parse_as<double>(key, value, "a real number");
  if (!std::isfinite(v)) throw bad_value(key, value, "a finite real number");
  return v;
}

std::vector<std::size_t> parse_count_list(std::string_view key,
                                          std::string_view value) {
  std::vector<std::size_t> out;
  while (true) {
    const std::size_t comma = value.find(',');
    out.push_back(parse_count(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw bad_value(key, value, "a boolean");
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k > 0) out += ',';
    out += std::to_string(values[k]);
  }
  return out;
}

std::string_view dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kMl1m:
      return "ml-1m";
    case DatasetKind::kCsv:
      return "csv";
    case DatasetKind::kSynthetic:
      return "synthetic";
  }
  return "ml-1m";
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](std::string_view key, const std::string& why) {
    throw ConfigError("key '" + std::string(key) + "': " + why);
  };
  if (hyper.embed_dim == 0) fail("embed_dim", "must be positive");
  if (hyper.layer_dims.empty()) fail("layers", "must list at least one width");
  for (std::size_t w : hyper.layer_dims) {
    if (w == 0) fail("layers", "widths must be positive");
  }
  if (!(hyper.learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (negative_ratio < 1) fail("negative_ratio", "must be >= 1");
  if (num_targets < 1) fail("num_targets", "must be >= 1");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (ks.empty()) fail("k", "must list at least one K");
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] == 0) fail("k", "values must be positive");
    if (j > 0 && ks[j] <= ks[j - 1]) fail("k", "values must be strictly ascending");
  }
  if (attack.num_approx < 1) fail("num_approx", "must be >= 1");
  if (!(attack.sigma > 0.0)) fail("sigma", "must be positive");
  if (!(attack.mining_lr > 0.0)) fail("mining_lr", "must be positive");
  if (!(attack.poison_scale > 0.0)) fail("poison_scale", "must be positive");
  if (!(attack.malicious_fraction >= 0.0 && attack.malicious_fraction <= 1.0)) {
    fail("rho", "must lie in [0, 1]");
  }
  if (attack.kind != AttackKind::kNone && !(attack.malicious_fraction > 0.0)) {
    fail("rho", "must be positive when an attack is configured");
  }
  if (policy.kind == ParticipationPolicy::Kind::kFraction &&
      !(policy.fraction > 0.0 && policy.fraction <= 1.0)) {
    fail("participation", "fraction must lie in (0, 1]");
  }
  if (policy.kind == ParticipationPolicy::Kind::kBatches && policy.batch_size == 0) {
    fail("clients_per_round", "must be positive");
  }
  if (dataset_kind == DatasetKind::kSynthetic) {
    const auto& s = synthetic;
    if (s.num_users == 0) fail("synthetic_users", "must be positive");
    if (s.num_items == 0) fail("synthetic_items", "must be positive");
    if (s.min_profile == 0 || s.min_profile > s.max_profile) {
      fail("synthetic_min_profile", "must lie in [1, synthetic_max_profile]");
    }
    if (s.max_profile > s.num_items) {
      fail("synthetic_max_profile", "cannot exceed synthetic_items");
    }
  }
}

void set_config_value(ExperimentConfig& c, std::string_view key,
                      std::string_view value) {
  value = trim(value);
  if (key == "dataset") {
    c.dataset_path = std::string(value);
  } else if (key == "format") {
    if (value == "ml-1m") {
      c.dataset_kind = DatasetKind::kMl1m;
    } else if (value == "csv") {
      c.dataset_kind = DatasetKind::kCsv;
    } else if (value == "synthetic") {
      c.dataset_kind = DatasetKind::kSynthetic;
    } else {
      throw bad_value(key, value, "one of ml-1m, csv, synthetic");
    }
  } else if (key == "synthetic_users") {
    c.synthetic.num_users = parse_count(key, value);
  } else if (key == "synthetic_items") {
    c.synthetic.num_items = parse_count(key, value);
  } else if (key == "synthetic_min_profile") {
    c.synthetic.min_profile = parse_count(key, value);
  } else if (key == "synthetic_max_profile") {
    c.synthetic.max_profile = parse_count(key, value);
  } else if (key == "synthetic_exponent") {
    c.synthetic.exponent = parse_real(key, value);
  } else if (key == "synthetic_seed") {
    c.synthetic_seed = parse_as<std::uint64_t>(key, value, "an unsigned integer");
  } else if (key == "embed_dim") {
    c.hyper.embed_dim = parse_count(key, value);
  } else if (key == "layers") {
    c.hyper.layer_dims = parse_count_list(key, value);
  } else if (key == "learning_rate") {
    c.hyper.learning_rate = parse_real(key, value);
  } else if (key == "negative_ratio") {
    c.negative_ratio = parse_count(key, value);
  } else if (key == "num_targets") {
    c.num_targets = parse_count(key, value);
  } else if (key == "attack") {
    try {
      c.attack.kind = parse_attack_kind(value);
    } catch (const std::invalid_argument&) {
      throw bad_value(key, value, "one of none, ra, eb, a_ra, a_hum");
    }
  } else if (key == "num_approx") {
    c.attack.num_approx = parse_count(key, value);
  } else if (key == "sigma") {
    c.attack.sigma = parse_real(key, value);
  } else if (key == "mining_lr") {
    c.attack.mining_lr = parse_real(key, value);
  } else if (key == "mining_steps") {
    c.attack.mining_steps = parse_count(key, value);
  } else if (key == "poison_scale") {
    c.attack.poison_scale = parse_real(key, value);
  } else if (key == "rho") {
    c.attack.malicious_fraction = parse_real(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_count(key, value);
  } else if (key == "k") {
    c.ks = parse_count_list(key, value);
  } else if (key == "seed") {
    c.seed = parse_as<std::uint64_t>(key, value, "an unsigned integer");
  } else if (key == "output_dir") {
    c.output_dir = std::string(value);
  } else if (key == "participation") {
    const std::size_t batch = c.policy.batch_size;
    if (value == "all") {
      c.policy = ParticipationPolicy::all();
    } else if (value == "batches") {
      c.policy = ParticipationPolicy::batches(0);
    } else {
      c.policy = ParticipationPolicy::sample(parse_real(key, value));
    }
    c.policy.batch_size = batch;
  } else if (key == "clients_per_round") {
    c.policy.batch_size = parse_count(key, value);
  } else if (key == "parallel") {
    c.mode = parse_bool(key, value) ? ExecutionMode::kParallel
                                    : ExecutionMode::kSerial;
  } else {
    throw ConfigError("unknown key '" + std::string(key) + "'");
  }
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig config;
  std::map<std::string, std::size_t> key_lines;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);

    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + std::string(line) +
                        "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
    key_lines[std::string(key)] = line_no;
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    // Point at the line that set the offending key, if the file set it.
    const std::string what = e.what();
    const std::size_t open = what.find('\'');
    const std::size_t close = what.find('\'', open + 1);
    if (open != std::string::npos && close != std::string::npos) {
      const auto it = key_lines.find(what.substr(open + 1, close - open - 1));
      if (it != key_lines.end()) {
        throw ConfigError("line " + std::to_string(it->second) + ": " + what);
      }
    }
    throw;
  }
  return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

std::string participation_name(const ParticipationPolicy& policy) {
  switch (policy.kind) {
    case ParticipationPolicy::Kind::kAll:
      return "all";
    case ParticipationPolicy::Kind::kBatches:
      return "batches";
    case ParticipationPolicy::Kind::kFraction:
      break;
  }
  return format_real(policy.fraction);
}

}  // namespace

std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "dataset = " << c.dataset_path << '\n'
      << "format = " << dataset_kind_name(c.dataset_kind) << '\n'
      << "synthetic_users = " << c.synthetic.num_users << '\n'
      << "synthetic_items = " << c.synthetic.num_items << '\n'
      << "synthetic_min_profile = " << c.synthetic.min_profile << '\n'
      << "synthetic_max_profile = " << c.synthetic.max_profile << '\n'
      << "synthetic_exponent = " << format_real(c.synthetic.exponent) << '\n'
      << "synthetic_seed = " << c.synthetic_seed << '\n'
      << "embed_dim = " << c.hyper.embed_dim << '\n'
      << "layers = " << join(c.hyper.layer_dims) << '\n'
      << "learning_rate = " << format_real(c.hyper.learning_rate) << '\n'
      << "negative_ratio = " << c.negative_ratio << '\n'
      << "num_targets = " << c.num_targets << '\n'
      << "attack = " << to_string(c.attack.kind) << '\n'
      << "num_approx = " << c.attack.num_approx << '\n'
      << "sigma = " << format_real(c.attack.sigma) << '\n'
      << "mining_lr = " << format_real(c.attack.mining_lr) << '\n'
      << "mining_steps = " << c.attack.mining_steps << '\n'
      << "poison_scale = " << format_real(c.attack.poison_scale) << '\n'
      << "rho = " << format_real(c.attack.malicious_fraction) << '\n'
      << "epochs = " << c.epochs << '\n'
      << "k = " << join(c.ks) << '\n'
      << "seed = " << c.seed << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "participation = " << participation_name(c.policy) << '\n'
      << "clients_per_round = " << c.policy.batch_size << '\n'
      << "parallel = "
      << (c.mode == ExecutionMode::kParallel ? "true" : "false") << '\n';
  return out.str();
}

std::size_t malicious_count(const ExperimentConfig& config,
                            std::size_t num_users) {
  if (config.attack.kind == AttackKind::kNone) return 0;
  // The epsilon keeps e.g. 0.01 * 200 from rounding up to 3.
  const double raw =
      config.attack.malicious_fraction * static_cast<double>(num_users);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

InteractionData load_dataset(const ExperimentConfig& config) {
  switch (config.dataset_kind) {
    case DatasetKind::kMl1m:
      return load_interactions(config.dataset_path, DatasetFormat::kMl1m);
    case DatasetKind::kCsv:
      return load_interactions(config.dataset_path, DatasetFormat::kCsv);
    case DatasetKind::kSynthetic:
      return make_synthetic(config.synthetic, config.synthetic_seed);
  }
  throw ConfigError("unknown dataset kind");
}

RunRecord run_experiment(const ExperimentConfig& config,
                         const ProgressCallback& progress) {
  config.validate();
  RunRecord record;
  record.config = config;

  InteractionData data;
  try {
    data = split_per_user(load_dataset(config), config.seed);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("loading dataset: ") + e.what());
  }
  record.num_users = data.num_users;
  record.num_items = data.num_items;
  if (config.num_targets > data.num_items) {
    throw ConfigError("key 'num_targets': exceeds the number of items");
  }

  AttackParams attack = config.attack;
  attack.targets = select_target_items(data, config.num_targets);
  record.targets = attack.targets;
  record.num_malicious = malicious_count(config, data.num_users);
  if (attack.kind != AttackKind::kNone && record.num_malicious == 0) {
    throw ConfigError("key 'rho': yields no malicious users");
  }

  const std::size_t dim = config.hyper.embed_dim;
  std::vector<ClientState> clients = make_benign_clients(data, dim, config.seed);
  auto malicious =
      make_malicious_clients(data, attack, record.num_malicious,
                             static_cast<UserIndex>(data.num_users), dim,
                             config.seed);
  for (auto& c : malicious) clients.push_back(std::move(c));

  FederationConfig fed;
  fed.learning_rate = config.hyper.learning_rate;
  fed.negative_ratio = config.negative_ratio;
  fed.policy = config.policy;
  fed.seed = config.seed;
  fed.mode = config.mode;

  Simulation sim(
      Server(init_params(config.hyper, data.num_items,
                         derive_seed(config.seed, Stream::kInit))),
      std::move(clients), data, attack, fed);

  sim.train(config.epochs, [&](const EpochReport& report,
                               const GlobalParams& params,
                               std::span<const ClientState> view) {
    Evaluation eval =
        evaluate(params, view, data, attack.targets, config.ks, kUtilityK,
                 report.epoch + 1, config.mode);
    EpochRow row;
    row.epoch = report.epoch + 1;
    row.exposure = eval.exposure.mean;
    row.hit_ratio = eval.utility.hit_ratio;
    row.ndcg = eval.utility.ndcg;
    row.loss = report.mean_benign_loss();
    row.wall_seconds = report.wall_seconds;
    row.benign_participants = report.benign_participants;
    row.malicious_participants = report.malicious_participants;
    row.detail = std::move(eval.exposure);
    record.rows.push_back(std::move(row));
    if (progress) progress(record.rows.back());
  });
  return record;
}

void emit_series(const RunRecord& record, const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " +
                             outdir.string() + ": " + ec.message());
  }
  auto open = [&](const std::string& name) {
    std::ofstream out(outdir / name);
    if (!out) {
      throw std::runtime_error("cannot write " + (outdir / name).string());
    }
    return out;
  };

  const auto& ks = record.config.ks;
  {
    std::ofstream csv = open("metrics.csv");
    csv << "epoch";
    for (std::size_t k : ks) csv << ",er@" << k;
    csv << ",hr@10,ndcg@10,loss\n";
    for (const auto& row : record.rows) {
      csv << row.epoch;
      for (double v : row.exposure) csv << ',' << format_real(v);
      csv << ',' << format_real(row.hit_ratio) << ',' << format_real(row.ndcg)
          << ',' << format_real(row.loss) << '\n';
    }
    if (!csv) throw std::runtime_error("write failed for metrics.csv");
  }
  for (std::size_t c = 0; c < ks.size(); ++c) {
    std::ofstream dat = open("er@" + std::to_string(ks[c]) + ".dat");
    dat << "# epoch er@" << ks[c] << '\n';
    for (const auto& row : record.rows) {
      dat << row.epoch << ' ' << format_real(row.exposure[c]) << '\n';
    }
  }
  {
    std::ofstream info = open("run_info.txt");
    info << "# " << record.version << '\n'
         << "# users = " << record.num_users << '\n'
         << "# items = " << record.num_items << '\n'
         << "# malicious = " << record.num_malicious << '\n'
         << "# targets =";
    for (ItemIndex t : record.targets) info << ' ' << t;
    info << '\n' << config_to_text(record.config);
  }
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  MetricsTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics file");
  std::stringstream header(line);
  for (std::string cell; std::getline(header, cell, ',');) {
    table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    for (std::string cell; std::getline(cells, cell, ',');) {
      row.push_back(std::stod(cell));
    }
    if (row.size() != table.header.size()) {
      throw std::runtime_error("metrics row has the wrong number of columns");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace fedpoison
