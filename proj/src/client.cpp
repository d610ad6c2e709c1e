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

#include "fedpoison/client.hpp"

#include <cmath>

namespace fedpoison {

ClientStepResult benign_client_step(ClientState& client,
                                    const TrainingSet& training,
                                    const GlobalParams& params,
                                    double learning_rate) {
  ClientStepResult result;
  result.upload = GradientUpdate::zeros_for(params);
  result.num_pairs = training.pairs.size();
  if (training.pairs.empty()) {
    result.empty = true;
    return result;
  }

  std::vector<double> grad_p(client.embedding.values.size(), 0.0);
  ForwardTape tape;
  ModelGradients grads;
  for (const auto& [item, label] : training.pairs) {
    forward_into(client.embedding.values, item, params, tape);
    result.loss -= label == 1 ? std::log(tape.score) : std::log(1.0 - tape.score);
    backward_into(tape, bce_score_gradient(tape.score, label), params, grads);
    result.upload.add(grads, item);
    for (std::size_t j = 0; j < grad_p.size(); ++j) grad_p[j] += grads.grad_p[j];
  }

  for (std::size_t j = 0; j < grad_p.size(); ++j) {
    client.embedding.values[j] -= learning_rate * grad_p[j];
  }
  return result;
}

}  // namespace fedpoison
