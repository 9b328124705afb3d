/* Copyright 2026 The layerforge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace layerforge {

// Engine used for every random draw in the pipeline.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Identifier recorded in manifests next to the derived seed.
inline constexpr std::string_view kSeedMixName = "splitmix64(global ^ splitmix64(id))";

// Per-sample seed. Depends only on (global_seed, sample_id), never on which
// worker picks the sample up.
inline constexpr std::uint64_t sample_seed(std::uint64_t global_seed, std::uint64_t sample_id) {
  return splitmix64(global_seed ^ splitmix64(sample_id));
}

inline Rng make_sample_rng(std::uint64_t global_seed, std::uint64_t sample_id) {
  return Rng(sample_seed(global_seed, sample_id));
}

}  // namespace layerforge
