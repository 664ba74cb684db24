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

#include <cstdint>
#include <vector>

namespace coopwd {

struct Point {
    double row = 0.0;
    double col = 0.0;
};

/// Synthetic scene description. Objects are isotropic Gaussian blobs.
struct SceneSpec {
    Shape shape{4, 16, 16};
    std::size_t num_objects = 5;
    double blob_amplitude = 1.0;
    double blob_sigma = 1.5;
    double background_std = 0.05;
    /// Explicit centres; when empty they are drawn from the seed with
    /// `min_separation` between any two and `margin` from the border.
    std::vector<Point> object_centers;
    double min_separation = 4.0;
    double margin = 2.0;
    /// visibility[v][o]: viewer v (0 = ego, 1..K = CAVs) sees object o. When
    /// empty, default_visibility() is used.
    std::vector<std::vector<bool>> visibility;

    /// Throws ConfigError on invalid dimensions or centres.
    void validate() const;
};

/// Default occlusion pattern: the ego misses the last object; CAV k misses
/// object (k-1) mod (num_objects-1), so every object is seen by someone.
[[nodiscard]] std::vector<std::vector<bool>> default_visibility(std::size_t num_objects,
                                                                std::size_t num_cavs);

struct Scene {
    FeatureMap ego;
    std::vector<FeatureMap> cavs;
    std::vector<Point> truth;
};

/// Deterministic in (spec, num_cavs, seed). Per-object channel profiles are
/// drawn in [0.5, 1] so channels are correlated but not identical.
[[nodiscard]] Scene generate_scene(const SceneSpec& spec, std::size_t num_cavs, std::uint64_t seed);

} // namespace coopwd
