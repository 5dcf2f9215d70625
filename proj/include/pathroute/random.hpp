// Copyright 2026 The pathroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace pathroute {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer of (seed xor index); decorrelates per-sample streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean, double stddev);
int uniform_int(Rng& rng, int lo, int hi_inclusive);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace pathroute
