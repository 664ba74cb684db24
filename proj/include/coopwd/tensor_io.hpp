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

#include <filesystem>
#include <iosfwd>

namespace coopwd {

// "CWDT" file: magic, u32 version (1), u32 c, h, w, then little-endian f64
// values in row-major order.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void write_tensor(std::ostream& out, const FeatureMap& f);
[[nodiscard]] FeatureMap read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const FeatureMap& f);
[[nodiscard]] FeatureMap load_tensor(const std::filesystem::path& path);

namespace binio {
void write_u32(std::ostream& out, std::uint32_t v);
void write_f64(std::ostream& out, double v);
[[nodiscard]] std::uint32_t read_u32(std::istream& in);
[[nodiscard]] double read_f64(std::istream& in);
void write_magic(std::ostream& out, const char (&magic)[5]);
/// Throws IoError when the next four bytes are not `magic`.
void expect_magic(std::istream& in, const char (&magic)[5]);
} // namespace binio

} // namespace coopwd
