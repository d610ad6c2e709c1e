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

// Acceptance checks. Prints one PASS, FAIL or SKIP line per criterion and
// exits non-zero if any criterion fails. Set FEDPOISON_ML1M to the path of
// ratings.dat to run the full-scale criteria 9 and 10.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedpoison/attacks.hpp"
#include "fedpoison/client.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/experiment.hpp"
#include "fedpoison/metrics.hpp"
#include "fedpoison/model.hpp"
#include "oracles/reference.hpp"
#include "support/toy.hpp"

namespace fedpoison {
namespace {

namespace fs = std::filesystem;
using Samples = std::vector<std::pair<std::vector<double>, ItemIndex>>;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

constexpr std::size_t kToySeeds = 5;
constexpr double kFdTolerance = 1e-4;

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

bool near_kink(const Samples& s, const GlobalParams& p) {
  for (const auto& [u, i] : s) {
    const auto t = oracle::trace_score(u, p.item_embeddings.row(i), p);
    if (t.min_abs_preactivation < 1e-3 || std::abs(t.logit) > 25) return true;
  }
  return false;
}

std::vector<double> minus(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = a[j] - b[j];
  return d;
}

// 1. Gradients of the training loss and both attack losses.
Outcome gradient_exactness() {
  std::mt19937_64 rng(2026);
  const std::size_t dims[] = {1, 2, 4};
  const std::size_t num_items = 6;
  double worst = 0.0;
  std::size_t accepted = 0, attempts = 0;
  while (accepted < 100 && attempts < 100000) {
    ++attempts;
    HyperParams h;
    h.embed_dim = dims[rng() % 3];
    h.layer_dims.assign(1 + rng() % 2, 0);
    for (auto& w : h.layer_dims) w = 1 + rng() % 5;
    const GlobalParams params = oracle::random_params(h, num_items, rng);
    const std::vector<double> p = oracle::random_vector(h.embed_dim, rng);

    // Training loss on two positives and four negatives.
    TrainingSet training;
    training.pairs = {{0, 1}, {3, 1}, {1, 0}, {2, 0}, {4, 0}, {5, 0}};
    training.num_positives = 2;
    std::vector<std::pair<ItemIndex, int>> labelled;
    Samples probes;
    for (const auto& li : training.pairs) {
      labelled.push_back({li.item, li.label});
      probes.push_back({p, li.item});
    }

    // Attack losses on shared Gaussian draws.
    AttackParams attack;
    attack.targets = {1, 4};
    attack.num_approx = 3;
    attack.sigma = 0.7;
    attack.mining_lr = 0.05;
    attack.mining_steps = 5;
    const std::uint64_t seed = rng();
    Engine draw_rng(seed);
    const auto draws = draw_approx_embeddings(attack.num_approx, h.embed_dim, attack.sigma,
                                              draw_rng);
    Samples ra, hum;
    for (ItemIndex t : attack.targets) {
      for (const auto& d : draws) {
        ra.push_back({d.values, t});
        hum.push_back(
            {mine_hard_user(params, t, d, attack.mining_lr, attack.mining_steps).embedding.values,
             t});
      }
    }
    if (near_kink(probes, params) || near_kink(ra, params) || near_kink(hum, params)) continue;
    ++accepted;

    ClientState client{0, ClientRole::kBenign, UserEmbedding{p}, {0, 3}};
    const ClientStepResult step = benign_client_step(client, training, params, 1.0);
    const auto bce_numeric = oracle::numeric_gradient(
        params, [&](const GlobalParams& q) { return oracle::bce_sum(p, labelled, q); });
    const auto bce_numeric_p = oracle::numeric_gradient_vec(
        p, [&](std::span<const double> v) { return oracle::bce_sum(v, labelled, params); });
    worst = std::max(worst, oracle::max_relative_error(oracle::flatten(step.upload, params),
                                                       bce_numeric));
    worst = std::max(worst, oracle::max_relative_error(minus(p, client.embedding.values),
                                                       bce_numeric_p));

    const auto ra_numeric = oracle::numeric_gradient(
        params, [&](const GlobalParams& q) { return oracle::promotion(ra, attack.num_approx, q); });
    attack.kind = AttackKind::kRandomApproximation;
    worst = std::max(worst, oracle::max_relative_error(
                                oracle::flatten(a_ra_update(params, attack, seed), params),
                                ra_numeric));

    const auto hum_numeric = oracle::numeric_gradient(params, [&](const GlobalParams& q) {
      return oracle::promotion(hum, attack.num_approx, q);
    });
    attack.kind = AttackKind::kHardUserMining;
    worst = std::max(worst, oracle::max_relative_error(
                                oracle::flatten(a_hum_update(params, attack, seed), params),
                                hum_numeric));

    // Hard-user loss with respect to the approximated embedding.
    const auto li_numeric = oracle::numeric_gradient_vec(p, [&](std::span<const double> v) {
      return -std::log(1.0 - oracle::score(v, 4, params));
    });
    const auto mined = mine_hard_user(params, 4, UserEmbedding{p}, 1.0, 1);
    worst = std::max(worst,
                     oracle::max_relative_error(minus(p, mined.embedding.values), li_numeric));
  }
  Outcome o;
  o.verdict = accepted == 100 && worst < kFdTolerance ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("%.0f configurations (%.0f resampled), max relative error %.2e", accepted,
                 attempts - accepted, worst);
  return o;
}

// 2. ER@K against a brute-force recount.
Outcome exposure_oracle() {
  std::mt19937_64 rng(7);
  std::size_t mismatches = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t users = 1 + rng() % 100;
    const std::size_t items = 2 + rng() % 199;
    InteractionData data;
    data.num_users = users;
    data.num_items = items;
    data.train.resize(users);
    data.test.assign(users, {});
    for (auto& t : data.train) {
      for (ItemIndex i = 0; i < items; ++i) {
        if (rng() % 5 == 0) t.push_back(i);
      }
    }
    data.recount();
    std::vector<std::vector<double>> scores(users, std::vector<double>(items));
    std::vector<std::vector<ItemIndex>> lists(users);
    const std::size_t k = 1 + rng() % 30;
    if (instance % 2 == 0) {
      // Coarse scores, so ties are common.
      for (std::size_t u = 0; u < users; ++u) {
        for (auto& s : scores[u]) s = static_cast<double>(rng() % 6);
        lists[u] = top_k_from_scores(scores[u], k, data.train[u]).items;
      }
    } else {
      // Scores from a model through the evaluation path.
      HyperParams h;
      h.embed_dim = 4;
      h.layer_dims = {4};
      const GlobalParams params = init_params(h, items, rng());
      std::vector<ClientState> clients;
      for (UserIndex u = 0; u < users; ++u) {
        clients.push_back({u, ClientRole::kBenign, UserEmbedding{oracle::random_vector(4, rng)},
                           data.train[u]});
        for (ItemIndex i = 0; i < items; ++i) {
          scores[u][i] = predict(clients[u].embedding.values, i, params);
        }
      }
      lists = rank_benign_users(params, clients, data, k, ExecutionMode::kParallel);
    }
    const auto target = static_cast<ItemIndex>(rng() % items);
    const double expected = oracle::exposure_by_recount(target, scores, data.train, k);
    if (er_at_k(target, lists, data, k).ratio != expected) ++mismatches;
  }
  Outcome o;
  o.verdict = mismatches == 0 ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("50 instances, %.0f mismatches", mismatches);
  return o;
}

// 3. A-hum without mining steps equals A-ra.
Outcome reduction_identity() {
  std::size_t differ = 0, cases = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GlobalParams params = init_params(HyperParams{}, 50, s);
    for (const std::vector<ItemIndex>& targets :
         {std::vector<ItemIndex>{7}, std::vector<ItemIndex>{3, 19, 44}}) {
      AttackParams attack;
      attack.kind = AttackKind::kHardUserMining;
      attack.targets = targets;
      attack.mining_steps = 0;
      const std::uint64_t seed = derive_seed(s, Stream::kAttack, 4, 2);
      ++cases;
      if (!(a_hum_update(params, attack, seed) == a_ra_update(params, attack, seed))) ++differ;
    }
  }
  Outcome o;
  o.verdict = differ == 0 ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("%.0f cases, %.0f not bit-identical", cases, differ);
  return o;
}

ExperimentConfig toy_config(AttackKind kind, double rho, std::size_t epochs,
                            std::uint64_t seed) {
  ExperimentConfig c;
  c.dataset_kind = DatasetKind::kSynthetic;
  c.attack.kind = kind;
  c.attack.malicious_fraction = rho;
  c.epochs = epochs;
  c.seed = seed;
  c.ks = {10};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 4. Equal seeds give byte-identical metrics.csv.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() /
                        ("fedpoison_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  ExperimentConfig c = toy_config(AttackKind::kHardUserMining, 0.01, 10, 3);
  c.ks = {5, 10, 20, 30};
  emit_series(run_experiment(c), root / "a");
  emit_series(run_experiment(c), root / "b");
  const std::string a = slurp(root / "a" / "metrics.csv");
  const std::string b = slurp(root / "b" / "metrics.csv");
  fs::remove_all(root);
  Outcome o;
  o.verdict = !a.empty() && a == b ? Verdict::kPass : Verdict::kFail;
  o.detail = a == b ? "metrics.csv identical (" + std::to_string(a.size()) + " bytes)"
                    : std::string("metrics.csv differs");
  return o;
}

// 5. Mining does not increase the hard-user loss.
Outcome mining_efficacy() {
  const auto toy = testing::train_toy(10, 0);
  const ItemIndex target = toy.targets[0];
  std::size_t ok = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Engine rng = make_engine(trial, Stream::kAttack, 0, 0);
    const UserEmbedding init = draw_approx_embeddings(1, 8, 0.01, rng)[0];
    const auto mined = mine_hard_user(toy.params, target, init, 0.001, 30);
    if (hard_user_loss(mined.embedding.values, target, toy.params) <=
        hard_user_loss(init.values, target, toy.params)) {
      ++ok;
    }
  }
  Outcome o;
  o.verdict = ok >= 95 ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("%.0f of 100 trials non-increasing", ok);
  return o;
}

// ER@10 series per seed, index [seed][epoch].
using Curves = std::vector<std::vector<double>>;

Curves toy_curves(AttackKind kind, double rho) {
  Curves out;
  for (std::uint64_t s = 0; s < kToySeeds; ++s) {
    const RunRecord r = run_experiment(toy_config(kind, rho, 30, s));
    std::vector<double> curve;
    for (const auto& row : r.rows) curve.push_back(row.exposure[0]);
    out.push_back(std::move(curve));
  }
  return out;
}

double mean_final(const Curves& c) {
  double sum = 0.0;
  for (const auto& curve : c) sum += curve.back();
  return sum / static_cast<double>(c.size());
}

double max_any(const Curves& c) {
  double m = 0.0;
  for (const auto& curve : c) m = std::max(m, *std::max_element(curve.begin(), curve.end()));
  return m;
}

const Curves& no_attack_curves() {
  static const Curves curves = toy_curves(AttackKind::kNone, 0.01);
  return curves;
}

// 6. Both attacks lift the target on the toy dataset.
Outcome toy_attack_lift() {
  const double baseline = max_any(no_attack_curves());
  const double ra = mean_final(toy_curves(AttackKind::kRandomApproximation, 0.01));
  const double hum = mean_final(toy_curves(AttackKind::kHardUserMining, 0.01));
  Outcome o;
  o.verdict = baseline < 0.05 && ra >= 0.8 && hum >= 0.8 ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("no-attack max ER@10 %.4f; final ER@10 a_ra %.4f, a_hum %.4f", baseline, ra,
                 hum);
  return o;
}

// 7. With one malicious user A-hum does at least as well as A-ra.
Outcome scarce_malicious() {
  const double ra = mean_final(toy_curves(AttackKind::kRandomApproximation, 0.005));
  const double hum = mean_final(toy_curves(AttackKind::kHardUserMining, 0.005));
  Outcome o;
  o.verdict = hum >= ra ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("1 malicious user; final ER@10 a_hum %.4f, a_ra %.4f", hum, ra);
  return o;
}

// 8. Random fake profiles do not move the target.
Outcome ra_impotence() {
  const double none = mean_final(no_attack_curves());
  const double ra = mean_final(toy_curves(AttackKind::kRandom, 0.01));
  Outcome o;
  o.verdict = ra <= none + 0.02 ? Verdict::kPass : Verdict::kFail;
  o.detail = fmt("final ER@10 ra %.4f, none %.4f", ra, none);
  return o;
}

const char* ml1m_path() { return std::getenv("FEDPOISON_ML1M"); }

// 9. Full-scale dataset counts.
Outcome ml1m_load() {
  if (ml1m_path() == nullptr) return {Verdict::kSkip, "FEDPOISON_ML1M not set"};
  const InteractionData d = load_interactions(ml1m_path(), DatasetFormat::kMl1m);
  std::size_t positives = 0;
  for (const auto& t : d.train) positives += t.size();
  for (const auto& t : d.test) positives += t.size();
  Outcome o;
  o.verdict = d.num_users == 6040 && d.num_items == 3706 && positives == 1000208
                  ? Verdict::kPass
                  : Verdict::kFail;
  o.detail = fmt("users %.0f, items %.0f, positives %.0f", d.num_users, d.num_items, positives);
  return o;
}

// 10. Full-scale attack curves.
Outcome ml1m_attack() {
  if (ml1m_path() == nullptr) return {Verdict::kSkip, "FEDPOISON_ML1M not set"};
  std::string detail;
  bool pass = true;
  for (AttackKind kind : {AttackKind::kRandomApproximation, AttackKind::kHardUserMining}) {
    ExperimentConfig c;
    c.dataset_path = ml1m_path();
    c.attack.kind = kind;
    c.ks = {10};
    const RunRecord r = run_experiment(c);
    double early = 0.0;
    for (const auto& row : r.rows) {
      if (row.epoch <= 10) early = std::max(early, row.exposure[0]);
    }
    const double final_er = r.rows.back().exposure[0];
    pass = pass && early >= 0.9 && final_er >= 0.8;
    detail += std::string(to_string(kind)) + fmt(" max ER@10 by epoch 10 %.4f, final %.4f; ",
                                                 early, final_er);
  }
  return {pass ? Verdict::kPass : Verdict::kFail, detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no limit
  std::function<Outcome()> check;
};

}  // namespace
}  // namespace fedpoison

int main() {
  using namespace fedpoison;
  const std::vector<Criterion> criteria = {
      {1, "gradient exactness", 10, gradient_exactness},
      {2, "ER@K oracle equivalence", 5, exposure_oracle},
      {3, "reduction identity", 1, reduction_identity},
      {4, "determinism", 30, determinism},
      {5, "hard-user mining efficacy", 10, mining_efficacy},
      {6, "toy attack lift", 300, toy_attack_lift},
      {7, "scarce-malicious ordering", 300, scarce_malicious},
      {8, "RA impotence", 120, ra_impotence},
      {9, "ML-1M load check", 0, ml1m_load},
      {10, "ML-1M attack curve", 0, ml1m_attack},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.verdict == Verdict::kPass && c.limit_seconds > 0 && secs >= c.limit_seconds) {
      o.verdict = Verdict::kFail;
      o.detail += "; over the time limit";
    }
    const char* tag = o.verdict == Verdict::kPass   ? "PASS"
                      : o.verdict == Verdict::kSkip ? "SKIP"
                                                    : "FAIL";
    if (o.verdict == Verdict::kFail) ++failures;
    std::printf("%s [%d] %s: %s (%.2f s)\n", tag, c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
