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
#include "coopwd/scene.hpp"

#include <span>
#include <vector>

namespace coopwd {

enum class FusionMode { mean, softmax_attention };

struct FusionConfig {
    FusionMode mode = FusionMode::mean;
    double temperature = 1.0;
    void validate() const;
};

/// Mean mode: arithmetic mean of the ego map and all CAV maps.
/// Attention mode: per-pixel softmax over maps of (channel L2 norm / temperature).
[[nodiscard]] FeatureMap fuse(const FusionConfig& cfg, const FeatureMap& ego, std::span<const FeatureMap> cavs);

/// Proxy-AP distance thresholds in pixels (loose, strict).
inline constexpr double kDefaultThresholdsPxArr[] = {2.0, 1.0};
inline constexpr std::span<const double> kDefaultThresholdsPx{kDefaultThresholdsPxArr};

struct Detection {
    double row = 0.0;
    double col = 0.0;
    double score = 0.0;
};

struct DetectionResult {
    std::vector<Detection> peaks; ///< sorted by score, descending
    /// matched[t][i]: detection i is a true positive at threshold t.
    std::vector<std::vector<bool>> matched;
    std::vector<double> thresholds_px;
    std::vector<double> ap; ///< one proxy-AP per threshold
};

/// Local maxima of the channel-mean map (3x3 neighbourhood) above
/// median + k * sigma, where sigma is a robust noise scale taken from the MAD
/// of horizontal neighbour differences. Peaks are refined to sub-pixel by a
/// parabolic fit.
[[nodiscard]] std::vector<Detection> detect_peaks(const FeatureMap& f, double mad_k = 3.0);

/// 11-point interpolated AP from detections sorted by score.
/// Conventions: no truth and no detections -> 1; no truth with detections -> 0.
[[nodiscard]] double average_precision_11pt(const std::vector<bool>& tp_sorted, std::size_t num_truth);

/// Greedy score-ordered matching to the nearest unmatched truth centre within
/// each distance threshold, then 11-point AP.
[[nodiscard]] DetectionResult detect_and_score(const FeatureMap& fused, std::span<const Point> truth,
                                               std::span<const double> thresholds_px = kDefaultThresholdsPx);

} // namespace coopwd
