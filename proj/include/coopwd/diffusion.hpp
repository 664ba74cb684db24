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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace coopwd {

/// Reverse-process variance. `posterior` is the variance of the Gaussian
/// q(x_{t-1} | x_t, x_0, y), delta_cond_t * delta_{t-1} / delta_t, which is the
/// one consistent with c_x, c_y and c_eps. `inverted_ratio` uses
/// delta_cond_t * delta_t / delta_{t-1} and is kept for comparison.
enum class ReverseVariance { posterior, inverted_ratio };

/// Per-step quantities of the conditional diffusion process, indexed 0..T.
///
/// Index 0 holds the boundary values (alpha_bar = 1, m = 0, delta = 0); the
/// coefficient arrays are meaningful for t >= 1. The interpolation ratio is
/// m_t = sqrt((1 - abar_t) / sqrt(abar_t)) and delta_t = (1 - abar_t) - m_t^2 abar_t,
/// which simplifies to (1 - abar_t)(1 - sqrt(abar_t)).
class DiffusionSchedule {
  public:
    /// beta_t linearly spaced from beta_min (t = 1) to beta_max (t = T).
    /// Throws ConfigError for bad arguments, NumericalError if a variance is negative.
    static DiffusionSchedule linear(std::size_t steps, double beta_min, double beta_max,
                                    ReverseVariance variance = ReverseVariance::posterior);
    /// Arbitrary non-decreasing betas in (0, 1). `conditional = false` forces
    /// m == 0, which is the unconditional DDPM.
    static DiffusionSchedule from_betas(std::vector<double> betas, bool conditional = true,
                                        ReverseVariance variance = ReverseVariance::posterior);

    [[nodiscard]] std::size_t steps() const noexcept { return beta_.size() - 1; }
    [[nodiscard]] ReverseVariance variance_form() const noexcept { return variance_; }

    [[nodiscard]] double beta(std::size_t t) const { return beta_.at(t); }
    [[nodiscard]] double alpha(std::size_t t) const { return alpha_.at(t); }
    [[nodiscard]] double alpha_bar(std::size_t t) const { return alpha_bar_.at(t); }
    [[nodiscard]] double m(std::size_t t) const { return m_.at(t); }
    [[nodiscard]] double delta(std::size_t t) const { return delta_.at(t); }
    /// delta_{t|t-1}
    [[nodiscard]] double delta_cond(std::size_t t) const { return delta_cond_.at(t); }
    /// Reverse-process variance; 0 at t = 1.
    [[nodiscard]] double delta_tilde(std::size_t t) const { return delta_tilde_.at(t); }
    [[nodiscard]] double c_x(std::size_t t) const { return c_x_.at(t); }
    [[nodiscard]] double c_y(std::size_t t) const { return c_y_.at(t); }
    [[nodiscard]] double c_eps(std::size_t t) const { return c_eps_.at(t); }

    [[nodiscard]] std::span<const double> alpha_bars() const noexcept { return alpha_bar_; }

    /// Columns: t,beta,alpha_bar,m,delta,delta_cond,delta_tilde,c_x,c_y,c_eps
    void write_csv(std::ostream& out) const;

  private:
    DiffusionSchedule() = default;
    void compute(bool conditional);
    ReverseVariance variance_ = ReverseVariance::posterior;
    void check_invariants(bool linear) const;

    std::vector<double> beta_, alpha_, alpha_bar_, m_, delta_, delta_cond_, delta_tilde_;
    std::vector<double> c_x_, c_y_, c_eps_;
};

/// The training schedule used throughout: T = 50, beta in [1e-4, 0.035].
[[nodiscard]] DiffusionSchedule build_schedule(std::size_t steps = 50, double beta_min = 1e-4,
                                               double beta_max = 0.035);

/// Few-step sampling schedule. Its own betas drive the reverse coefficients;
/// each level is also mapped to the training step with the nearest alpha_bar,
/// which is the step index the noise predictor is conditioned on.
struct InferenceSchedule {
    std::vector<double> levels;
    DiffusionSchedule schedule;
    std::vector<std::size_t> train_step; ///< 1-based, one per level

    [[nodiscard]] std::size_t steps() const noexcept { return levels.size(); }
};

[[nodiscard]] std::vector<double> default_fast_levels();

/// Throws ConfigError if levels are not strictly increasing or the mapped
/// steps collide.
[[nodiscard]] InferenceSchedule make_inference_schedule(std::vector<double> levels, const DiffusionSchedule& train);

struct Diffused {
    FeatureMap x_t;
    FeatureMap eps;
};

/// x_t = (1 - m_t) sqrt(abar_t) x0 + m_t sqrt(abar_t) y + sqrt(delta_t) eps.
[[nodiscard]] Diffused forward_diffuse(const FeatureMap& x0, const FeatureMap& y, std::size_t t,
                                       const DiffusionSchedule& sched, std::uint64_t seed);

/// x_{t-1} = c_x x_t + c_y y - c_eps eps_hat + sqrt(delta_tilde) z; z omitted at t = 1.
[[nodiscard]] FeatureMap reverse_step(const FeatureMap& x_t, const FeatureMap& y, std::size_t t,
                                      const FeatureMap& eps_hat, const DiffusionSchedule& sched,
                                      std::uint64_t seed);

/// Regression target for the noise predictor:
/// (m_t sqrt(abar_t) (y - x0) + sqrt(delta_t) eps) / sqrt(1 - abar_t).
[[nodiscard]] FeatureMap training_target(const FeatureMap& x0, const FeatureMap& y, const FeatureMap& eps,
                                         std::size_t t, const DiffusionSchedule& sched);

/// Noise predictor interface: (x_t, y, training step) -> eps_hat.
using NoiseFn = std::function<FeatureMap(const FeatureMap&, const FeatureMap&, std::size_t)>;

/// Runs reverse_step from t = T down to 1 on `sched`, calling `predict` with
/// predictor_step[t - 1] as its step argument. Returns x_0.
[[nodiscard]] FeatureMap reverse_chain(FeatureMap x_T, const FeatureMap& y, const DiffusionSchedule& sched,
                                       std::span<const std::size_t> predictor_step, const NoiseFn& predict,
                                       std::uint64_t seed);

/// Conditional denoising of y: x_T = sqrt(abar_T) y + sqrt(delta_T) z on the
/// inference schedule, then the reverse chain down to x_0.
[[nodiscard]] FeatureMap denoise(const FeatureMap& y, const NoiseFn& predict, const InferenceSchedule& infer,
                                 std::uint64_t seed);

} // namespace coopwd
