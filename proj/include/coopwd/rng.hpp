// SPDX-License-Identifier: Apache-2.0
//
// coopwd: cooperative perception feature recovery over impaired V2V links
// Copyright (C) 2026 The coopwd authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace coopwd {

using Rng = std::mt19937_64;

/// Child seed for stream `index` under `seed`.
///
/// The rule is one SplitMix64 finalizer round over `seed + (index + 1) * golden`.
/// Workers and sub-streams (noise, CSI error, scene content) never share a
/// child seed as long as their (seed, index) pairs differ.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Circularly-symmetric complex normal with E|z|^2 = variance.
inline std::complex<double> complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double s = std::sqrt(variance / 2.0);
    const double re = n(rng);
    const double im = n(rng);
    return {s * re, s * im};
}

} // namespace coopwd
