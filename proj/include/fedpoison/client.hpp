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

#ifndef FEDPOISON_CLIENT_HPP_
#define FEDPOISON_CLIENT_HPP_

#include <cstddef>
#include <vector>

#include "fedpoison/data.hpp"
#include "fedpoison/model.hpp"

namespace fedpoison {

enum class ClientRole { kBenign, kMalicious };

// Device-local state of one participant. The embedding and positives never
// leave the owning client except through the simulator's evaluation path.
struct ClientState {
  UserIndex index = 0;
  ClientRole role = ClientRole::kBenign;
  UserEmbedding embedding;
  // Benign: the user's train positives. Random-attack fake users: their
  // synthetic profile. Other malicious clients: empty.
  std::vector<ItemIndex> positives;
};

struct ClientStepResult {
  GradientUpdate upload;
  double loss = 0.0;
  std::size_t num_pairs = 0;
  bool empty = false;
};

// One local round: BCE gradients over `training` at (p_u, params), then
// p_u <- p_u - learning_rate * grad_p. Only the shared-parameter gradient is
// returned for upload.
ClientStepResult benign_client_step(ClientState& client,
                                    const TrainingSet& training,
                                    const GlobalParams& params,
                                    double learning_rate);

}  // namespace fedpoison

#endif  // FEDPOISON_CLIENT_HPP_
