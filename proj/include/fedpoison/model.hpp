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

// Neural collaborative filtering: score = sigmoid(h . MLP(p ++ q_item)) with
// ReLU hidden layers, binary cross-entropy loss, and hand-written backprop.

#ifndef FEDPOISON_MODEL_HPP_
#define FEDPOISON_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedpoison {

using ItemIndex = std::uint32_t;
using UserIndex = std::uint32_t;

// Logits are clamped to this magnitude before the sigmoid so that neither
// log(score) nor log(1 - score) can reach -inf.
inline constexpr double kLogitClamp = 30.0;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct HyperParams {
  std::size_t embed_dim = 8;
  std::vector<std::size_t> layer_dims = {8, 8};
  double learning_rate = 0.001;

  // Throws std::invalid_argument on an empty or zero-width architecture.
  void validate() const;
  std::size_t input_dim() const { return 2 * embed_dim; }
};

// One hidden layer: z = W x + b, a = ReLU(z). `weights` is out x in.
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

// Server-held trainable state: item embeddings, hidden layers and the output
// weight vector. The same shape doubles as an aggregated gradient.
struct GlobalParams {
  Matrix item_embeddings;  // num_items x embed_dim
  std::vector<DenseLayer> layers;
  std::vector<double> output_weights;

  std::size_t num_items() const { return item_embeddings.rows(); }
  std::size_t embed_dim() const { return item_embeddings.cols(); }

  // All-zero parameters with the given architecture.
  static GlobalParams zeros(const HyperParams& hyper, std::size_t num_items);
  GlobalParams zeros_like() const;

  bool all_finite() const;
  std::size_t parameter_count() const;
  double squared_norm() const;

  bool operator==(const GlobalParams&) const = default;
};

struct UserEmbedding {
  std::vector<double> values;

  bool operator==(const UserEmbedding&) const = default;
};

// Intermediates of one forward pass, kept for backward().
struct ForwardTape {
  ItemIndex item = 0;
  std::vector<double> input;  // p ++ q
  std::vector<std::vector<double>> pre_activations;
  std::vector<std::vector<double>> activations;
  double logit = 0.0;  // after clamping
  double score = 0.5;
};

struct ModelGradients {
  std::vector<double> grad_p;
  std::vector<double> grad_q;
  std::vector<double> grad_h;
  std::vector<DenseLayer> grad_layers;
};

// Forward pass for (user, item). Throws std::out_of_range for a bad item
// index, ShapeError for mismatched shapes and NonFiniteError for non-finite
// inputs.
ForwardTape forward(const UserEmbedding& user, ItemIndex item,
                    const GlobalParams& params);

// Same as forward() but reuses `tape` storage.
void forward_into(std::span<const double> user, ItemIndex item,
                  const GlobalParams& params, ForwardTape& tape);

// Score only; bit-identical to forward(...).score.
double predict(std::span<const double> user, ItemIndex item,
               const GlobalParams& params);

struct ScoredLabel {
  double score;
  int label;  // 0 or 1
};

struct LossValue {
  double value = 0.0;
  bool empty_input = false;
};

// Sum of -[y log s + (1 - y) log(1 - s)] over `pairs`.
LossValue bce_loss(std::span<const ScoredLabel> pairs);

// dL/dscore of a single BCE term.
double bce_score_gradient(double score, int label);

ModelGradients backward(const ForwardTape& tape, double dloss_dscore,
                        const GlobalParams& params);

// Overwrites `grads` (resizing as needed) with the gradients of one pass.
void backward_into(const ForwardTape& tape, double dloss_dscore,
                   const GlobalParams& params, ModelGradients& grads);

// Item embeddings ~ N(0, 0.01^2); hidden weights and h uniform in
// +-sqrt(6 / (fan_in + fan_out)); biases zero.
GlobalParams init_params(const HyperParams& hyper, std::size_t num_items,
                         std::uint64_t seed);

// Fresh user embedding ~ N(0, 0.01^2).
UserEmbedding init_user_embedding(std::size_t embed_dim, std::uint64_t seed);

// Gradient of the shared parameters as uploaded by one client. Item rows are
// sparse: only items the client actually scored are present.
struct GradientUpdate {
  std::map<ItemIndex, std::vector<double>> item_rows;
  std::vector<DenseLayer> layers;
  std::vector<double> output_weights;

  static GradientUpdate zeros_for(const GlobalParams& params);

  // Adds the shared-parameter part of `grads` (which came from a pass on
  // `item`) scaled by `scale`.
  void add(const ModelGradients& grads, ItemIndex item, double scale = 1.0);
  void scale(double factor);
  bool is_zero() const;
  double squared_norm() const;

  bool operator==(const GradientUpdate&) const = default;
};

// total += update.
void accumulate(GlobalParams& total, const GradientUpdate& update);

// Returns params - learning_rate * total_grad. Throws NonFiniteError naming
// the offending tensor if total_grad has a non-finite entry.
GlobalParams apply_update(GlobalParams params, const GlobalParams& total_grad,
                          double learning_rate);

// Precomputed item half of the first layer, W_q q_i + b, for every item.
// Lets evaluation score one user against all items without repeating the
// item-side product; results are bit-identical to predict().
class ItemProjection {
 public:
  explicit ItemProjection(const GlobalParams& params);

  // Writes score(user, i) for every item into `scores` (size num_items).
  void score_all(std::span<const double> user, const GlobalParams& params,
                 std::span<double> scores) const;

 private:
  Matrix projected_;  // num_items x layer_dims[0]
};

}  // namespace fedpoison

#endif  // FEDPOISON_MODEL_HPP_
