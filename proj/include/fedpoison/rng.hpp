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

#ifndef FEDPOISON_RNG_HPP_
#define FEDPOISON_RNG_HPP_

#include <cstdint>
#include <random>

namespace fedpoison {

using Engine = std::mt19937_64;

// Independent randomness consumers. A master seed is expanded into one stream
// per purpose so that changing how one component draws numbers never shifts
// the draws of another.
enum class Stream : std::uint64_t {
  kInit = 1,
  kUserInit = 2,
  kSplit = 3,
  kNegatives = 4,
  kAttack = 5,
  kSelection = 6,
  kFakeUsers = 7,
  kSynthetic = 8,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for stream `stream` at coordinates (a, b), e.g. (epoch, user).
// Each coordinate is folded through the mixer, so nearby inputs give
// unrelated seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ static_cast<std::uint64_t>(stream));
  s = mix64(s ^ a);
  s = mix64(s ^ (b + 0x632BE59BD9B4E019ULL));
  return s;
}

inline Engine make_engine(std::uint64_t master, Stream stream,
                          std::uint64_t a = 0, std::uint64_t b = 0) {
  return Engine(derive_seed(master, stream, a, b));
}

}  // namespace fedpoison

#endif  // FEDPOISON_RNG_HPP_
