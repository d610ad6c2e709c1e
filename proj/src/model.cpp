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

#include "fedpoison/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fedpoison/rng.hpp"

namespace fedpoison {
namespace {

constexpr double kEmbeddingStddev = 0.01;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp_logit(double logit) {
  return std::clamp(logit, -kLogitClamp, kLogitClamp);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

void check_item_and_user(std::span<const double> user, ItemIndex item,
                         const GlobalParams& params) {
  if (item >= params.num_items()) {
    throw std::out_of_range("item index " + std::to_string(item) +
                            " out of range (num_items=" +
                            std::to_string(params.num_items()) + ")");
  }
  if (user.size() != params.embed_dim()) {
    throw ShapeError("user embedding has " + std::to_string(user.size()) +
                     " entries, expected " +
                     std::to_string(params.embed_dim()));
  }
  if (params.layers.empty() ||
      params.layers.front().weights.cols() != 2 * params.embed_dim()) {
    throw ShapeError("first layer input width must be 2 * embed_dim");
  }
  if (!all_finite(user) || !all_finite(params.item_embeddings.row(item))) {
    throw NonFiniteError("non-finite embedding entry in forward pass");
  }
}

// User half of the first layer: W[:, :d] p.
void user_projection(std::span<const double> user, const DenseLayer& first,
                     std::span<double> out) {
  const std::size_t d = user.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    const auto w = first.weights.row(o);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += w[j] * user[j];
    out[o] = acc;
  }
}

// Item half of the first layer plus bias: W[:, d:] q + b.
void item_projection(std::span<const double> item, const DenseLayer& first,
                     std::span<double> out) {
  const std::size_t d = item.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    const auto w = first.weights.row(o);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += w[d + j] * item[j];
    out[o] = acc + first.bias[o];
  }
}

// Runs layers 2..L and the output head starting from the first-layer
// pre-activation `z`. `a` and `b` are scratch buffers.
double score_from_first_layer(std::span<double> z, const GlobalParams& params,
                              std::vector<double>& a, std::vector<double>& b) {
  a.assign(z.begin(), z.end());
  for (double& v : a) v = v > 0.0 ? v : 0.0;
  for (std::size_t k = 1; k < params.layers.size(); ++k) {
    const DenseLayer& layer = params.layers[k];
    b.resize(layer.bias.size());
    for (std::size_t o = 0; o < b.size(); ++o) {
      const auto w = layer.weights.row(o);
      double acc = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) acc += w[j] * a[j];
      acc += layer.bias[o];
      b[o] = acc > 0.0 ? acc : 0.0;
    }
    a.swap(b);
  }
  double logit = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    logit += params.output_weights[j] * a[j];
  }
  return sigmoid(clamp_logit(logit));
}

void resize_like(const GlobalParams& params, ModelGradients& g) {
  const std::size_t d = params.embed_dim();
  g.grad_p.assign(d, 0.0);
  g.grad_q.assign(d, 0.0);
  g.grad_h.assign(params.output_weights.size(), 0.0);
  g.grad_layers.resize(params.layers.size());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& src = params.layers[k];
    auto& dst = g.grad_layers[k];
    if (dst.weights.rows() != src.weights.rows() ||
        dst.weights.cols() != src.weights.cols()) {
      dst.weights = Matrix(src.weights.rows(), src.weights.cols());
    }
    dst.bias.assign(src.bias.size(), 0.0);
  }
}

template <typename Fn>
void for_each_tensor(const GlobalParams& params, Fn&& fn) {
  fn("item_embeddings", params.item_embeddings.values());
  for (const auto& layer : params.layers) {
    fn("layer weights", layer.weights.values());
    fn("layer bias", std::span<const double>(layer.bias));
  }
  fn("output_weights", std::span<const double>(params.output_weights));
}

}  // namespace

void HyperParams::validate() const {
  if (embed_dim == 0) throw std::invalid_argument("embed_dim must be positive");
  if (layer_dims.empty()) {
    throw std::invalid_argument("layer_dims must be non-empty");
  }
  for (std::size_t w : layer_dims) {
    if (w == 0) throw std::invalid_argument("layer_dims entries must be positive");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
}

GlobalParams GlobalParams::zeros(const HyperParams& hyper,
                                 std::size_t num_items) {
  hyper.validate();
  GlobalParams p;
  p.item_embeddings = Matrix(num_items, hyper.embed_dim);
  std::size_t in = hyper.input_dim();
  for (std::size_t out : hyper.layer_dims) {
    p.layers.push_back({Matrix(out, in), std::vector<double>(out, 0.0)});
    in = out;
  }
  p.output_weights.assign(in, 0.0);
  return p;
}

GlobalParams GlobalParams::zeros_like() const {
  GlobalParams p;
  p.item_embeddings = Matrix(item_embeddings.rows(), item_embeddings.cols());
  for (const auto& layer : layers) {
    p.layers.push_back({Matrix(layer.weights.rows(), layer.weights.cols()),
                        std::vector<double>(layer.bias.size(), 0.0)});
  }
  p.output_weights.assign(output_weights.size(), 0.0);
  return p;
}

bool GlobalParams::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](const char*, std::span<const double> t) {
    ok = ok && fedpoison::all_finite(t);
  });
  return ok;
}

std::size_t GlobalParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this,
                  [&](const char*, std::span<const double> t) { n += t.size(); });
  return n;
}

double GlobalParams::squared_norm() const {
  double s = 0.0;
  for_each_tensor(*this, [&](const char*, std::span<const double> t) {
    for (double v : t) s += v * v;
  });
  return s;
}

void forward_into(std::span<const double> user, ItemIndex item,
                  const GlobalParams& params, ForwardTape& tape) {
  check_item_and_user(user, item, params);
  const std::size_t d = params.embed_dim();
  const auto q = params.item_embeddings.row(item);

  tape.item = item;
  tape.input.resize(2 * d);
  std::copy(user.begin(), user.end(), tape.input.begin());
  std::copy(q.begin(), q.end(), tape.input.begin() + d);

  const std::size_t num_layers = params.layers.size();
  tape.pre_activations.resize(num_layers);
  tape.activations.resize(num_layers);

  const DenseLayer& first = params.layers.front();
  auto& z1 = tape.pre_activations[0];
  z1.resize(first.bias.size());
  std::vector<double> item_part(first.bias.size());
  user_projection(user, first, z1);
  item_projection(q, first, item_part);
  for (std::size_t o = 0; o < z1.size(); ++o) z1[o] = z1[o] + item_part[o];

  for (std::size_t k = 0; k < num_layers; ++k) {
    auto& z = tape.pre_activations[k];
    if (k > 0) {
      const DenseLayer& layer = params.layers[k];
      const auto& prev = tape.activations[k - 1];
      if (layer.weights.cols() != prev.size()) {
        throw ShapeError("layer " + std::to_string(k) + " input width mismatch");
      }
      z.resize(layer.bias.size());
      for (std::size_t o = 0; o < z.size(); ++o) {
        const auto w = layer.weights.row(o);
        double acc = 0.0;
        for (std::size_t j = 0; j < prev.size(); ++j) acc += w[j] * prev[j];
        z[o] = acc + layer.bias[o];
      }
    }
    auto& a = tape.activations[k];
    a.resize(z.size());
    for (std::size_t o = 0; o < z.size(); ++o) a[o] = z[o] > 0.0 ? z[o] : 0.0;
  }

  const auto& last = tape.activations.back();
  if (params.output_weights.size() != last.size()) {
    throw ShapeError("output weight length does not match last layer width");
  }
  double logit = 0.0;
  for (std::size_t j = 0; j < last.size(); ++j) {
    logit += params.output_weights[j] * last[j];
  }
  tape.logit = clamp_logit(logit);
  tape.score = sigmoid(tape.logit);
}

ForwardTape forward(const UserEmbedding& user, ItemIndex item,
                    const GlobalParams& params) {
  ForwardTape tape;
  forward_into(user.values, item, params, tape);
  return tape;
}

double predict(std::span<const double> user, ItemIndex item,
               const GlobalParams& params) {
  check_item_and_user(user, item, params);
  const DenseLayer& first = params.layers.front();
  std::vector<double> z(first.bias.size());
  std::vector<double> item_part(first.bias.size());
  user_projection(user, first, z);
  item_projection(params.item_embeddings.row(item), first, item_part);
  for (std::size_t o = 0; o < z.size(); ++o) z[o] = z[o] + item_part[o];
  std::vector<double> a, b;
  return score_from_first_layer(z, params, a, b);
}

LossValue bce_loss(std::span<const ScoredLabel> pairs) {
  LossValue loss;
  if (pairs.empty()) {
    loss.empty_input = true;
    return loss;
  }
  for (const auto& [score, label] : pairs) {
    loss.value -= label == 1 ? std::log(score) : std::log(1.0 - score);
  }
  return loss;
}

double bce_score_gradient(double score, int label) {
  return label == 1 ? -1.0 / score : 1.0 / (1.0 - score);
}

void backward_into(const ForwardTape& tape, double dloss_dscore,
                   const GlobalParams& params, ModelGradients& grads) {
  const std::size_t num_layers = params.layers.size();
  if (tape.pre_activations.size() != num_layers ||
      tape.input.size() != 2 * params.embed_dim() ||
      tape.activations.back().size() != params.output_weights.size()) {
    throw ShapeError("forward tape does not match parameter shapes");
  }
  resize_like(params, grads);

  const double dlogit = dloss_dscore * tape.score * (1.0 - tape.score);
  const auto& last = tape.activations.back();
  for (std::size_t j = 0; j < last.size(); ++j) grads.grad_h[j] = dlogit * last[j];

  // Upstream gradient w.r.t. the current layer's activation.
  std::vector<double> upstream(last.size());
  for (std::size_t j = 0; j < last.size(); ++j) {
    upstream[j] = dlogit * params.output_weights[j];
  }

  for (std::size_t k = num_layers; k-- > 0;) {
    const DenseLayer& layer = params.layers[k];
    DenseLayer& g = grads.grad_layers[k];
    const auto& z = tape.pre_activations[k];
    const auto& in = k == 0 ? tape.input : tape.activations[k - 1];
    if (z.size() != layer.bias.size() || in.size() != layer.weights.cols()) {
      throw ShapeError("forward tape does not match layer " + std::to_string(k));
    }
    std::vector<double> next(in.size(), 0.0);
    for (std::size_t o = 0; o < z.size(); ++o) {
      const double delta = z[o] > 0.0 ? upstream[o] : 0.0;
      g.bias[o] = delta;
      auto gw = g.weights.row(o);
      const auto w = layer.weights.row(o);
      for (std::size_t j = 0; j < in.size(); ++j) {
        gw[j] = delta * in[j];
        next[j] += w[j] * delta;
      }
    }
    upstream.swap(next);
  }

  const std::size_t d = params.embed_dim();
  std::copy(upstream.begin(), upstream.begin() + d, grads.grad_p.begin());
  std::copy(upstream.begin() + d, upstream.end(), grads.grad_q.begin());
}

ModelGradients backward(const ForwardTape& tape, double dloss_dscore,
                        const GlobalParams& params) {
  ModelGradients g;
  backward_into(tape, dloss_dscore, params, g);
  return g;
}

GlobalParams init_params(const HyperParams& hyper, std::size_t num_items,
                         std::uint64_t seed) {
  GlobalParams p = GlobalParams::zeros(hyper, num_items);
  Engine rng(seed);
  std::normal_distribution<double> gauss(0.0, kEmbeddingStddev);
  for (double& v : p.item_embeddings.values()) v = gauss(rng);
  for (auto& layer : p.layers) {
    const double fan = static_cast<double>(layer.weights.rows() +
                                           layer.weights.cols());
    const double limit = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (double& v : layer.weights.values()) v = uni(rng);
  }
  // h maps last-width -> 1.
  const double limit =
      std::sqrt(6.0 / static_cast<double>(p.output_weights.size() + 1));
  std::uniform_real_distribution<double> uni(-limit, limit);
  for (double& v : p.output_weights) v = uni(rng);
  return p;
}

UserEmbedding init_user_embedding(std::size_t embed_dim, std::uint64_t seed) {
  Engine rng(seed);
  std::normal_distribution<double> gauss(0.0, kEmbeddingStddev);
  UserEmbedding u;
  u.values.resize(embed_dim);
  for (double& v : u.values) v = gauss(rng);
  return u;
}

GradientUpdate GradientUpdate::zeros_for(const GlobalParams& params) {
  GradientUpdate u;
  for (const auto& layer : params.layers) {
    u.layers.push_back({Matrix(layer.weights.rows(), layer.weights.cols()),
                        std::vector<double>(layer.bias.size(), 0.0)});
  }
  u.output_weights.assign(params.output_weights.size(), 0.0);
  return u;
}

void GradientUpdate::add(const ModelGradients& grads, ItemIndex item,
                         double scale) {
  if (grads.grad_layers.size() != layers.size() ||
      grads.grad_h.size() != output_weights.size()) {
    throw ShapeError("gradient shape does not match update");
  }
  auto [it, inserted] = item_rows.try_emplace(item);
  if (inserted) it->second.assign(grads.grad_q.size(), 0.0);
  for (std::size_t j = 0; j < grads.grad_q.size(); ++j) {
    it->second[j] += scale * grads.grad_q[j];
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto dst = layers[k].weights.values();
    const auto src = grads.grad_layers[k].weights.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
    for (std::size_t j = 0; j < layers[k].bias.size(); ++j) {
      layers[k].bias[j] += scale * grads.grad_layers[k].bias[j];
    }
  }
  for (std::size_t j = 0; j < output_weights.size(); ++j) {
    output_weights[j] += scale * grads.grad_h[j];
  }
}

void GradientUpdate::scale(double factor) {
  for (auto& [item, row] : item_rows) {
    for (double& v : row) v *= factor;
  }
  for (auto& layer : layers) {
    for (double& v : layer.weights.values()) v *= factor;
    for (double& v : layer.bias) v *= factor;
  }
  for (double& v : output_weights) v *= factor;
}

bool GradientUpdate::is_zero() const { return squared_norm() == 0.0; }

double GradientUpdate::squared_norm() const {
  double s = 0.0;
  for (const auto& [item, row] : item_rows) {
    for (double v : row) s += v * v;
  }
  for (const auto& layer : layers) {
    for (double v : layer.weights.values()) s += v * v;
    for (double v : layer.bias) s += v * v;
  }
  for (double v : output_weights) s += v * v;
  return s;
}

void accumulate(GlobalParams& total, const GradientUpdate& update) {
  if (update.layers.size() != total.layers.size() ||
      update.output_weights.size() != total.output_weights.size()) {
    throw ShapeError("gradient update does not match parameter shapes");
  }
  for (const auto& [item, row] : update.item_rows) {
    if (item >= total.num_items() || row.size() != total.embed_dim()) {
      throw ShapeError("gradient update item row out of range");
    }
    auto dst = total.item_embeddings.row(item);
    for (std::size_t j = 0; j < row.size(); ++j) dst[j] += row[j];
  }
  for (std::size_t k = 0; k < total.layers.size(); ++k) {
    auto dst = total.layers[k].weights.values();
    const auto src = update.layers[k].weights.values();
    if (dst.size() != src.size()) {
      throw ShapeError("gradient update layer shape mismatch");
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    for (std::size_t j = 0; j < total.layers[k].bias.size(); ++j) {
      total.layers[k].bias[j] += update.layers[k].bias[j];
    }
  }
  for (std::size_t j = 0; j < total.output_weights.size(); ++j) {
    total.output_weights[j] += update.output_weights[j];
  }
}

GlobalParams apply_update(GlobalParams params, const GlobalParams& total_grad,
                          double learning_rate) {
  if (total_grad.parameter_count() != params.parameter_count() ||
      total_grad.layers.size() != params.layers.size()) {
    throw ShapeError("aggregated gradient does not match parameter shapes");
  }
  for_each_tensor(total_grad, [](const char* name, std::span<const double> t) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (!std::isfinite(t[j])) {
        throw NonFiniteError(std::string("non-finite aggregated gradient in ") +
                             name + " at flat index " + std::to_string(j));
      }
    }
  });
  auto step = [learning_rate](std::span<double> dst, std::span<const double> g) {
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] -= learning_rate * g[j];
  };
  step(params.item_embeddings.values(), total_grad.item_embeddings.values());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    step(params.layers[k].weights.values(),
         total_grad.layers[k].weights.values());
    step(params.layers[k].bias, total_grad.layers[k].bias);
  }
  step(params.output_weights, total_grad.output_weights);
  return params;
}

ItemProjection::ItemProjection(const GlobalParams& params) {
  const DenseLayer& first = params.layers.front();
  projected_ = Matrix(params.num_items(), first.bias.size());
  for (std::size_t i = 0; i < params.num_items(); ++i) {
    item_projection(params.item_embeddings.row(i), first, projected_.row(i));
  }
}

void ItemProjection::score_all(std::span<const double> user,
                               const GlobalParams& params,
                               std::span<double> scores) const {
  if (scores.size() != projected_.rows() || user.size() != params.embed_dim()) {
    throw ShapeError("score_all buffer or user embedding has the wrong size");
  }
  if (!all_finite(user)) {
    throw NonFiniteError("non-finite user embedding in score_all");
  }
  const std::size_t width = projected_.cols();
  std::vector<double> user_part(width), z(width), a, b;
  user_projection(user, params.layers.front(), user_part);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto item_part = projected_.row(i);
    for (std::size_t o = 0; o < width; ++o) z[o] = user_part[o] + item_part[o];
    scores[i] = score_from_first_layer(z, params, a, b);
  }
}

}  // namespace fedpoison
