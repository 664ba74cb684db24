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
#include "coopwd/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace coopwd {

struct WeightingConfig {
    std::size_t channels = 4;
    std::size_t hidden = 16;
    std::size_t embed_dim = 32;
};

/// CAV-level reliability score W = logistic(a * cos(e_ego, e_k) + b), where e is
/// a shared two-layer conv embedding followed by global average pooling.
class WeightingModel {
  public:
    explicit WeightingModel(WeightingConfig cfg = {});
    void init(std::uint64_t seed);

    [[nodiscard]] const WeightingConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] nn::ParamSet& params() noexcept { return ps_; }
    [[nodiscard]] const nn::ParamSet& params() const noexcept { return ps_; }

    [[nodiscard]] double scale() const noexcept { return ps_.value_ptr(calib_off_)[0]; }
    [[nodiscard]] double offset() const noexcept { return ps_.value_ptr(calib_off_)[1]; }
    void set_calibration(double a, double b) noexcept;

    [[nodiscard]] std::vector<double> embed(const FeatureMap& f) const;
    [[nodiscard]] double similarity(const FeatureMap& ego, const FeatureMap& cav) const;
    /// W_k in (0, 1). Throws ConfigError on shape mismatch and NumericalError
    /// on non-finite input.
    [[nodiscard]] double weight(const FeatureMap& ego, const FeatureMap& cav) const;

    struct EmbedCache {
        nn::Plane plane;
        std::vector<double> col1, a1, h1, col2, a2;
    };
    std::vector<double> embed_cached(const FeatureMap& f, EmbedCache& c) const;
    /// Accumulates parameter gradients for dL/de.
    void embed_backward(EmbedCache& c, std::span<const double> de);

    /// "CWDW" model file.
    void write(std::ostream& out) const;
    [[nodiscard]] static WeightingModel read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    [[nodiscard]] static WeightingModel load(const std::filesystem::path& path);

  private:
    WeightingConfig cfg_;
    nn::ParamSet ps_;
    nn::Conv3x3 conv1_, conv2_;
    std::size_t calib_off_ = 0;
};

[[nodiscard]] double cosine_similarity(std::span<const double> u, std::span<const double> v) noexcept;

/// f_k^W = W * f_k. Throws ConfigError unless 0 <= W <= 1.
[[nodiscard]] FeatureMap apply_weight(double w, const FeatureMap& f);

/// One scene's ego map with a lightly and a heavily distorted replica of the
/// same CAV map.
struct ContrastTriplet {
    FeatureMap ego;
    FeatureMap light;
    FeatureMap heavy;
};

using TripletSource = std::function<ContrastTriplet(std::uint64_t seed)>;

struct WeightingTrainConfig {
    std::size_t steps = 300;
    std::size_t batch = 8;
    double learning_rate = 1e-3;
    double temperature = 0.1;
    std::size_t calibration_pool = 128;
    double light_target = 0.98; ///< W assigned to the median light similarity
    double heavy_target = 0.05; ///< W assigned to the median heavy similarity
};

struct WeightingTrainReport {
    std::vector<double> loss;
    double median_light_similarity = 0.0;
    double median_heavy_similarity = 0.0;
};

/// Contrastive (InfoNCE) training of the embedding, then logistic calibration.
/// Anchor: the ego map. Positive: the light replica of the same scene.
/// Negatives: every heavy replica in the batch and light replicas of other
/// scenes. Throws NumericalError when the embeddings collapse.
WeightingTrainReport train_weighting(WeightingModel& model, const TripletSource& source,
                                     const WeightingTrainConfig& cfg, std::uint64_t seed);

/// InfoNCE loss for a batch given precomputed embeddings; fills dL/de.
/// Exposed for gradient tests.
double contrastive_loss(std::span<const std::vector<double>> ego, std::span<const std::vector<double>> light,
                        std::span<const std::vector<double>> heavy, double temperature,
                        std::vector<std::vector<double>>* d_ego, std::vector<std::vector<double>>* d_light,
                        std::vector<std::vector<double>>* d_heavy);

enum class GateDecision { denoise, bypass };

/// Denoiser bypass gate: bypass iff W < threshold.
struct GatePolicy {
    double threshold = 0.6;
    std::size_t invocations = 0;
    std::size_t bypasses = 0;

    GateDecision decide(double w);
    [[nodiscard]] std::size_t decisions() const noexcept { return invocations + bypasses; }
};

} // namespace coopwd
