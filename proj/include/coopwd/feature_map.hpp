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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace coopwd {

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    [[nodiscard]] constexpr std::size_t size() const noexcept { return channels * height * width; }
    [[nodiscard]] constexpr std::size_t plane() const noexcept { return height * width; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

/// Real C x H x W tensor, row-major in (c, h, w).
class FeatureMap {
  public:
    FeatureMap() = default;
    explicit FeatureMap(Shape shape, std::int64_t frame_id = 0, std::int64_t cav_id = 0);
    FeatureMap(Shape shape, std::vector<double> data, std::int64_t frame_id = 0, std::int64_t cav_id = 0);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }

    [[nodiscard]] double& at(std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[(c * shape_.height + h) * shape_.width + w];
    }
    [[nodiscard]] double at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[(c * shape_.height + h) * shape_.width + w];
    }

    std::int64_t frame_id = 0;
    std::int64_t cav_id = 0;

    [[nodiscard]] bool all_finite() const noexcept;
    /// Throws NumericalError naming `where` if any entry is NaN or Inf.
    void require_finite(const char* where) const;

    FeatureMap& operator*=(double s) noexcept;
    FeatureMap& operator+=(const FeatureMap& other);

    friend bool operator==(const FeatureMap& a, const FeatureMap& b) noexcept {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

  private:
    Shape shape_{};
    std::vector<double> data_;
};

[[nodiscard]] FeatureMap operator*(double s, FeatureMap f);
[[nodiscard]] FeatureMap operator-(const FeatureMap& a, const FeatureMap& b);

void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* what);

[[nodiscard]] double mse(const FeatureMap& a, const FeatureMap& b);
[[nodiscard]] double mean_square(const FeatureMap& f) noexcept;

/// Per-pixel mean over channels; H x W plane.
[[nodiscard]] std::vector<double> channel_mean(const FeatureMap& f);

/// Optional transmit-side compressor: 2x2 average pool (odd edges are averaged
/// over the available pixels).
[[nodiscard]] FeatureMap downsample2x(const FeatureMap& f);
/// Nearest-neighbour upsample to `target` (which must be the pre-pool shape).
[[nodiscard]] FeatureMap upsample2x(const FeatureMap& f, Shape target);

} // namespace coopwd
