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
#include "coopwd/diffusion.hpp"

#include "coopwd/error.hpp"
#include "coopwd/rng.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace coopwd {

DiffusionSchedule DiffusionSchedule::linear(std::size_t steps, double beta_min, double beta_max,
                                            ReverseVariance variance) {
    if (steps < 1)
        throw ConfigError("schedule needs T >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw ConfigError("schedule needs 0 < beta_min <= beta_max < 1");
    std::vector<double> betas(steps);
    for (std::size_t i = 0; i < steps; ++i)
        betas[i] = steps == 1 ? beta_min
                              : beta_min + (beta_max - beta_min) * static_cast<double>(i) /
                                               static_cast<double>(steps - 1);
    DiffusionSchedule s;
    s.variance_ = variance;
    s.beta_.push_back(0.0);
    s.beta_.insert(s.beta_.end(), betas.begin(), betas.end());
    s.compute(true);
    s.check_invariants(true);
    return s;
}

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas, bool conditional,
                                                ReverseVariance variance) {
    if (betas.empty())
        throw ConfigError("schedule needs at least one beta");
    for (double b : betas)
        if (!(b > 0.0 && b < 1.0))
            throw ConfigError("every beta must lie in (0, 1)");
    DiffusionSchedule s;
    s.variance_ = variance;
    s.beta_.push_back(0.0);
    s.beta_.insert(s.beta_.end(), betas.begin(), betas.end());
    s.compute(conditional);
    s.check_invariants(false);
    return s;
}

void DiffusionSchedule::compute(bool conditional) {
    const std::size_t n = beta_.size();
    alpha_.assign(n, 1.0);
    alpha_bar_.assign(n, 1.0);
    m_.assign(n, 0.0);
    delta_.assign(n, 0.0);
    delta_cond_.assign(n, 0.0);
    delta_tilde_.assign(n, 0.0);
    c_x_.assign(n, 0.0);
    c_y_.assign(n, 0.0);
    c_eps_.assign(n, 0.0);

    for (std::size_t t = 1; t < n; ++t) {
        alpha_[t] = 1.0 - beta_[t];
        alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
        m_[t] = conditional ? std::sqrt((1.0 - alpha_bar_[t]) / std::sqrt(alpha_bar_[t])) : 0.0;
        delta_[t] = (1.0 - alpha_bar_[t]) - m_[t] * m_[t] * alpha_bar_[t];
    }
    for (std::size_t t = 1; t < n; ++t) {
        const double ratio = (1.0 - m_[t]) / (1.0 - m_[t - 1]);
        delta_cond_[t] = delta_[t] - ratio * ratio * alpha_[t] * delta_[t - 1];
        // delta_0 = 0 makes the first reverse step deterministic.
        if (t > 1)
            delta_tilde_[t] = variance_ == ReverseVariance::posterior ? delta_cond_[t] * delta_[t - 1] / delta_[t]
                                                                      : delta_cond_[t] * delta_[t] / delta_[t - 1];

        const double sa = std::sqrt(alpha_[t]);
        c_x_[t] = ratio * delta_[t - 1] / delta_[t] * sa + (1.0 - m_[t - 1]) * delta_cond_[t] / delta_[t] / sa;
        c_y_[t] = (m_[t - 1] * delta_[t] - m_[t] * (1.0 - m_[t]) / (1.0 - m_[t - 1]) * alpha_[t] * delta_[t - 1]) *
                  std::sqrt(alpha_bar_[t - 1]) / delta_[t];
        c_eps_[t] = (1.0 - m_[t - 1]) * delta_cond_[t] / delta_[t] * std::sqrt(1.0 - alpha_bar_[t]) / sa;
    }
}

void DiffusionSchedule::check_invariants(bool linear) const {
    const std::size_t n = beta_.size();
    for (std::size_t t = 1; t < n; ++t) {
        const std::string at = " at t=" + std::to_string(t);
        if (t > 1 && beta_[t] < beta_[t - 1])
            throw ConfigError("betas must be non-decreasing" + at);
        if (!(alpha_bar_[t] < alpha_bar_[t - 1]))
            throw NumericalError("alpha_bar not strictly decreasing" + at);
        if (m_[t] < m_[t - 1] || !(m_[t] < 1.0))
            throw NumericalError("interpolation ratio m must be non-decreasing and < 1" + at);
        if (!(delta_[t] > 0.0) || delta_cond_[t] < 0.0 || delta_tilde_[t] < 0.0)
            throw NumericalError("schedule rejected: negative diffusion variance" + at);
        if (!std::isfinite(c_x_[t]) || !std::isfinite(c_y_[t]) || !std::isfinite(c_eps_[t]))
            throw NumericalError("schedule rejected: non-finite reverse coefficient" + at);
    }
    (void)linear;
}

void DiffusionSchedule::write_csv(std::ostream& out) const {
    out << "t,beta,alpha_bar,m,delta,delta_cond,delta_tilde,c_x,c_y,c_eps\n";
    out.precision(17);
    for (std::size_t t = 1; t < beta_.size(); ++t)
        out << t << ',' << beta_[t] << ',' << alpha_bar_[t] << ',' << m_[t] << ',' << delta_[t] << ','
            << delta_cond_[t] << ',' << delta_tilde_[t] << ',' << c_x_[t] << ',' << c_y_[t] << ',' << c_eps_[t]
            << '\n';
}

DiffusionSchedule build_schedule(std::size_t steps, double beta_min, double beta_max) {
    return DiffusionSchedule::linear(steps, beta_min, beta_max);
}

std::vector<double> default_fast_levels() { return {0.0001, 0.001, 0.01, 0.05, 0.2, 0.35}; }

InferenceSchedule make_inference_schedule(std::vector<double> levels, const DiffusionSchedule& train) {
    if (levels.empty())
        throw ConfigError("inference schedule needs at least one level");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i] > levels[i - 1]))
            throw ConfigError("inference levels must be strictly increasing");

    auto sched = DiffusionSchedule::from_betas(levels, true, train.variance_form());
    std::vector<std::size_t> steps;
    for (std::size_t s = 1; s <= levels.size(); ++s) {
        const double target = sched.alpha_bar(s);
        std::size_t best = 1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t t = 1; t <= train.steps(); ++t) {
            const double d = std::abs(train.alpha_bar(t) - target);
            if (d < best_d) {
                best_d = d;
                best = t;
            }
        }
        if (!steps.empty() && best <= steps.back())
            throw ConfigError("inference level " + std::to_string(levels[s - 1]) +
                              " does not map to a new training step");
        steps.push_back(best);
    }
    return InferenceSchedule{std::move(levels), std::move(sched), std::move(steps)};
}

namespace {

void check_step(std::size_t t, const DiffusionSchedule& sched) {
    if (t < 1 || t > sched.steps())
        throw ConfigError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps()) +
                          "]");
}

FeatureMap gaussian_like(const FeatureMap& like, std::uint64_t seed) {
    FeatureMap z(like.shape(), like.frame_id, like.cav_id);
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : z.data())
        v = n(rng);
    return z;
}

} // namespace

Diffused forward_diffuse(const FeatureMap& x0, const FeatureMap& y, std::size_t t, const DiffusionSchedule& sched,
                         std::uint64_t seed) {
    require_same_shape(x0, y, "forward_diffuse");
    check_step(t, sched);
    Diffused out{FeatureMap(x0.shape(), x0.frame_id, x0.cav_id), gaussian_like(x0, seed)};
    const double sab = std::sqrt(sched.alpha_bar(t));
    const double a = (1.0 - sched.m(t)) * sab;
    const double b = sched.m(t) * sab;
    const double s = std::sqrt(sched.delta(t));
    auto xt = out.x_t.data();
    auto e = out.eps.data();
    auto x = x0.data();
    auto yy = y.data();
    for (std::size_t i = 0; i < xt.size(); ++i)
        xt[i] = a * x[i] + b * yy[i] + s * e[i];
    return out;
}

FeatureMap reverse_step(const FeatureMap& x_t, const FeatureMap& y, std::size_t t, const FeatureMap& eps_hat,
                        const DiffusionSchedule& sched, std::uint64_t seed) {
    require_same_shape(x_t, y, "reverse_step");
    require_same_shape(x_t, eps_hat, "reverse_step");
    check_step(t, sched);
    FeatureMap out(x_t.shape(), x_t.frame_id, x_t.cav_id);
    const double cx = sched.c_x(t);
    const double cy = sched.c_y(t);
    const double ce = sched.c_eps(t);
    auto o = out.data();
    auto x = x_t.data();
    auto yy = y.data();
    auto e = eps_hat.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = cx * x[i] + cy * yy[i] - ce * e[i];
    if (t > 1 && sched.delta_tilde(t) > 0.0) {
        const double s = std::sqrt(sched.delta_tilde(t));
        Rng rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        for (double& v : o)
            v += s * n(rng);
    }
    return out;
}

FeatureMap training_target(const FeatureMap& x0, const FeatureMap& y, const FeatureMap& eps, std::size_t t,
                           const DiffusionSchedule& sched) {
    require_same_shape(x0, y, "training_target");
    require_same_shape(x0, eps, "training_target");
    check_step(t, sched);
    const double denom = std::sqrt(1.0 - sched.alpha_bar(t));
    const double a = sched.m(t) * std::sqrt(sched.alpha_bar(t)) / denom;
    const double b = std::sqrt(sched.delta(t)) / denom;
    FeatureMap out(x0.shape(), x0.frame_id, x0.cav_id);
    auto o = out.data();
    auto x = x0.data();
    auto yy = y.data();
    auto e = eps.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a * (yy[i] - x[i]) + b * e[i];
    return out;
}

FeatureMap reverse_chain(FeatureMap x, const FeatureMap& y, const DiffusionSchedule& sched,
                         std::span<const std::size_t> predictor_step, const NoiseFn& predict, std::uint64_t seed) {
    if (predictor_step.size() != sched.steps())
        throw ConfigError("reverse_chain: one predictor step per chain step is required");
    for (std::size_t t = sched.steps(); t >= 1; --t) {
        const FeatureMap eps_hat = predict(x, y, predictor_step[t - 1]);
        x = reverse_step(x, y, t, eps_hat, sched, derive_seed(seed, t));
    }
    return x;
}

FeatureMap denoise(const FeatureMap& y, const NoiseFn& predict, const InferenceSchedule& infer, std::uint64_t seed) {
    const auto& s = infer.schedule;
    const std::size_t T = s.steps();
    if (infer.train_step.size() != T)
        throw ConfigError("inference schedule has unmapped levels");
    FeatureMap x = gaussian_like(y, derive_seed(seed, 0));
    const double a = std::sqrt(s.alpha_bar(T));
    const double b = std::sqrt(s.delta(T));
    auto xv = x.data();
    auto yv = y.data();
    for (std::size_t i = 0; i < xv.size(); ++i)
        xv[i] = a * yv[i] + b * xv[i];
    return reverse_chain(std::move(x), y, s, infer.train_step, predict, derive_seed(seed, 1));
}

} // namespace coopwd
