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

#ifndef FEDPOISON_PARALLEL_HPP_
#define FEDPOISON_PARALLEL_HPP_

namespace fedpoison {

// kSerial is the reference path kept for testing; kParallel runs the same
// per-client / per-user work under OpenMP and must match it bit for bit.
enum class ExecutionMode { kSerial, kParallel };

}  // namespace fedpoison

#endif  // FEDPOISON_PARALLEL_HPP_
