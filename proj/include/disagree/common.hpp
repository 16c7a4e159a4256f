/*
 * Copyright 2026 The disagree Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "disagree/error.hpp"

namespace disagree {

// Rows are instances, columns are features.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for one (instance, method) stream under a master seed. The value only
// depends on its three inputs, so any evaluation order reproduces it.
inline std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t instance,
                                std::uint64_t stream) {
  return MixSeed(MixSeed(MixSeed(master) ^ instance) ^ (stream + 1));
}

// 64-bit FNV-1a.
inline std::uint64_t Fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool AllFinite(const Vector& v) { return v.allFinite(); }

}  // namespace disagree
