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

#include "coopwd/feature_map.hpp"

#include <complex>
#include <cstddef>
#include <vector>

namespace coopwd {

using cplx = std::complex<double>;

struct SlotRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
};

/// Complex symbols carrying one feature map over the air.
///
/// Consecutive real entries form the I and Q parts of one symbol. The frame is
/// zero-padded to a whole number of slots and scaled to unit mean power over
/// all symbols (padding included); `scale` undoes that normalisation.
struct SymbolFrame {
    std::vector<cplx> symbols;
    double scale = 1.0;
    std::size_t pad = 0;
    std::vector<SlotRange> slots;

    [[nodiscard]] std::size_t num_slots() const noexcept { return slots.size(); }
    [[nodiscard]] double mean_power() const noexcept;
};

/// Throws ConfigError for an empty tensor or a slot length that is < 2 or odd.
/// An all-zero tensor yields scale = 1 and all-zero symbols.
[[nodiscard]] SymbolFrame to_symbols(const FeatureMap& f, std::size_t slot_len);

/// Inverse of to_symbols. Throws ConfigError on a length/shape mismatch.
[[nodiscard]] FeatureMap from_symbols(const SymbolFrame& frame, Shape shape);

} // namespace coopwd
