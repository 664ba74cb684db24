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

#include "coopwd/diffusion.hpp"
#include "coopwd/feature_map.hpp"
#include "coopwd/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace coopwd {

/// Miniature conditional noise estimator eps_theta(x_t, y, t).
///
///   h1  = act(norm(conv_in([x_t ; y]))) + emb[t]
///   h2  = act(norm(conv_mid(h1)))
///   h3  = act(norm(conv_res(h2))) + h1
///   out = conv_out(h3)
///
/// `use_norm = false, use_activation = false` with zero biases and embeddings
/// gives a purely linear network, which the tests use as a linearity oracle.
struct PredictorConfig {
    std::size_t channels = 4;
    std::size_t hidden = 32;
    std::size_t groups = 4;
    std::size_t steps = 50;
    bool use_norm = true;
    bool use_activation = true;

    friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

struct TrainSample {
    FeatureMap x_t;
    FeatureMap y;
    FeatureMap x0;
    FeatureMap target;
    std::size_t t = 1;
};

/// L = beta_diffusion * MSE(eps_hat, target) + beta_coop * L_coop, where L_coop
/// is the MSE of the mean-fused map (over `fusion_views` maps) when the
/// one-step estimate x0_hat replaces x0.
struct LossWeights {
    double diffusion = 1.0;
    double coop = 0.1;
    std::size_t fusion_views = 2;
};

struct LossValue {
    double diffusion = 0.0;
    double coop = 0.0;
    double total = 0.0;
};

class NoisePredictor {
  public:
    explicit NoisePredictor(PredictorConfig cfg = {});

    /// Random initialisation; deterministic in seed.
    void init(std::uint64_t seed);

    [[nodiscard]] const PredictorConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] nn::ParamSet& params() noexcept { return ps_; }
    [[nodiscard]] const nn::ParamSet& params() const noexcept { return ps_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return ps_.size(); }

    /// Throws ConfigError on shape mismatch or a step outside [1, steps].
    [[nodiscard]] FeatureMap forward(const FeatureMap& x_t, const FeatureMap& y, std::size_t t) const;

    /// Zeroes the gradient buffers, then fills them with dL/dtheta for the
    /// batch mean loss. Throws ConfigError on an empty batch and
    /// NumericalError if the loss is not finite.
    LossValue loss_and_grad(std::span<const TrainSample> batch, const LossWeights& w, const DiffusionSchedule& sched);

    /// Loss only, no gradients.
    [[nodiscard]] LossValue loss(std::span<const TrainSample> batch, const LossWeights& w,
                                 const DiffusionSchedule& sched) const;

    /// "CWDP" parameter file.
    void write(std::ostream& out) const;
    [[nodiscard]] static NoisePredictor read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    [[nodiscard]] static NoisePredictor load(const std::filesystem::path& path);

  private:
    struct Cache;
    void forward_impl(const FeatureMap& x_t, const FeatureMap& y, std::size_t t, Cache& c) const;
    void backward_impl(Cache& c, std::span<const double> dout);

    PredictorConfig cfg_;
    nn::ParamSet ps_;
    nn::Conv3x3 conv_in_, conv_mid_, conv_res_, conv_out_;
    nn::GroupNorm norm_in_, norm_mid_, norm_res_;
    std::size_t emb_off_ = 0;
};

/// Root-mean-square of the entries; 0 for an all-zero map.
[[nodiscard]] double feature_rms(const FeatureMap& f) noexcept;

/// Denoises a received map: the map is scaled to unit RMS, run through the
/// conditional reverse chain on `infer`, and scaled back. `calls`, when given,
/// is incremented once per predictor evaluation.
[[nodiscard]] FeatureMap denoise_feature(const NoisePredictor& model, const InferenceSchedule& infer,
                                         const FeatureMap& y, std::uint64_t seed, std::size_t* calls = nullptr);

struct DenoiserTrainConfig {
    std::size_t steps = 2000;
    std::size_t batch = 8;
    double learning_rate = 1e-3;
    LossWeights weights{};
    double snr_min_db = 15.0;
    double snr_max_db = 20.0;
    double divergence_factor = 10.0;
    std::size_t divergence_window = 100;
};

/// Produces a (clean x0, received y) pair at the requested SNR.
using PairSource = std::function<std::pair<FeatureMap, FeatureMap>(std::uint64_t seed, double snr_db)>;

struct LossPoint {
    std::size_t step = 0;
    double loss_diffusion = 0.0;
    double loss_coop = 0.0;
};

/// Draws pairs at SNR ~ U[snr_min, snr_max], normalises each pair by rms(y),
/// samples t uniformly and eps ~ N(0, I), and takes one Adam step per batch.
/// Throws NumericalError on NaN loss or when the loss stays above
/// divergence_factor x the initial loss for divergence_window steps.
std::vector<LossPoint> train_denoiser(NoisePredictor& model, const PairSource& source, const DiffusionSchedule& sched,
                                      const DenoiserTrainConfig& cfg, std::uint64_t seed);

/// Columns: step,loss_diffusion,loss_coop
void write_loss_csv(std::ostream& out, std::span<const LossPoint> curve);

} // namespace coopwd
