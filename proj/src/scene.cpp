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
#include "coopwd/scene.hpp"

#include "coopwd/error.hpp"
#include "coopwd/rng.hpp"

#include <cmath>
#include <string>

namespace coopwd {

void SceneSpec::validate() const {
    if (shape.channels == 0 || shape.height == 0 || shape.width == 0)
        throw ConfigError("scene shape must be non-empty");
    if (!(blob_sigma > 0.0))
        throw ConfigError("blob_sigma must be > 0");
    if (!(background_std >= 0.0))
        throw ConfigError("background_std must be >= 0");
    if (!object_centers.empty() && object_centers.size() != num_objects)
        throw ConfigError("object_centers must list exactly num_objects centres");
    for (const auto& p : object_centers)
        if (!(p.row >= 0.0 && p.row < static_cast<double>(shape.height) && p.col >= 0.0 &&
              p.col < static_cast<double>(shape.width)))
            throw ConfigError("object centre outside the map");
    for (const auto& row : visibility)
        if (row.size() != num_objects)
            throw ConfigError("visibility rows must have num_objects entries");
}

std::vector<std::vector<bool>> default_visibility(std::size_t num_objects, std::size_t num_cavs) {
    std::vector<std::vector<bool>> vis(num_cavs + 1, std::vector<bool>(num_objects, true));
    if (num_objects == 0)
        return vis;
    vis[0][num_objects - 1] = false;
    if (num_objects >= 2)
        for (std::size_t k = 1; k <= num_cavs; ++k)
            vis[k][(k - 1) % (num_objects - 1)] = false;
    return vis;
}

namespace {

std::vector<Point> draw_centers(const SceneSpec& spec, Rng& rng) {
    const double h = static_cast<double>(spec.shape.height);
    const double w = static_cast<double>(spec.shape.width);
    const double m = std::min({spec.margin, h / 2 - 0.5, w / 2 - 0.5});
    std::uniform_real_distribution<double> ur(m, h - 1 - m);
    std::uniform_real_distribution<double> uc(m, w - 1 - m);
    std::vector<Point> out;
    // Rejection sampling; the separation constraint is relaxed after many
    // failures so tiny maps with many objects still terminate.
    double sep = spec.min_separation;
    int failures = 0;
    while (out.size() < spec.num_objects) {
        Point p{ur(rng), uc(rng)};
        bool ok = true;
        for (const auto& q : out)
            if (std::hypot(p.row - q.row, p.col - q.col) < sep)
                ok = false;
        if (ok) {
            out.push_back(p);
        } else if (++failures > 1000) {
            sep *= 0.9;
            failures = 0;
        }
    }
    return out;
}

} // namespace

Scene generate_scene(const SceneSpec& spec, std::size_t num_cavs, std::uint64_t seed) {
    spec.validate();
    if (num_cavs < 1)
        throw ConfigError("generate_scene needs at least one CAV");

    Rng layout_rng(derive_seed(seed, 0));
    Scene scene;
    scene.truth = spec.object_centers.empty() ? draw_centers(spec, layout_rng) : spec.object_centers;

    auto vis = spec.visibility.empty() ? default_visibility(spec.num_objects, num_cavs) : spec.visibility;
    if (vis.size() < num_cavs + 1)
        throw ConfigError("visibility lists " + std::to_string(vis.size()) + " viewers, need " +
                          std::to_string(num_cavs + 1));

    const auto& s = spec.shape;
    std::uniform_real_distribution<double> profile(0.5, 1.0);
    std::vector<std::vector<double>> gains(spec.num_objects, std::vector<double>(s.channels));
    for (auto& g : gains)
        for (double& v : g)
            v = profile(layout_rng);

    const double inv2s2 = 1.0 / (2.0 * spec.blob_sigma * spec.blob_sigma);
    auto render = [&](std::size_t viewer) {
        FeatureMap f(s, static_cast<std::int64_t>(seed), static_cast<std::int64_t>(viewer));
        for (std::size_t o = 0; o < spec.num_objects; ++o) {
            if (!vis[viewer][o])
                continue;
            const auto& p = scene.truth[o];
            for (std::size_t h = 0; h < s.height; ++h)
                for (std::size_t w = 0; w < s.width; ++w) {
                    const double dr = static_cast<double>(h) - p.row;
                    const double dc = static_cast<double>(w) - p.col;
                    const double g = spec.blob_amplitude * std::exp(-(dr * dr + dc * dc) * inv2s2);
                    for (std::size_t c = 0; c < s.channels; ++c)
                        f.at(c, h, w) += gains[o][c] * g;
                }
        }
        if (spec.background_std > 0.0) {
            Rng noise_rng(derive_seed(seed, 1 + viewer));
            std::normal_distribution<double> n(0.0, spec.background_std);
            for (double& v : f.data())
                v += n(noise_rng);
        }
        return f;
    };

    scene.ego = render(0);
    for (std::size_t k = 1; k <= num_cavs; ++k)
        scene.cavs.push_back(render(k));
    return scene;
}

} // namespace coopwd
