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
#include "coopwd/noise_predictor.hpp"

#include "coopwd/error.hpp"
#include "coopwd/rng.hpp"
#include "coopwd/tensor_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace coopwd {

namespace {
constexpr std::uint32_t kPredictorFileVersion = 1;
}

struct NoisePredictor::Cache {
    nn::Plane plane;
    std::size_t t = 1;
    std::vector<double> input;
    std::vector<double> col_in, col_mid, col_res, col_out;
    std::vector<double> a1, n1, h1, a2, n2, h2, a3, n3, h3, out;
    nn::GroupNormCache g1, g2, g3;
};

NoisePredictor::NoisePredictor(PredictorConfig cfg) : cfg_(cfg) {
    if (cfg_.channels == 0 || cfg_.hidden == 0 || cfg_.steps == 0)
        throw ConfigError("noise predictor needs non-zero channels, hidden width and steps");
    conv_in_ = nn::Conv3x3::create(ps_, "conv_in", 2 * cfg_.channels, cfg_.hidden);
    norm_in_ = nn::GroupNorm::create(ps_, "norm_in", cfg_.hidden, cfg_.groups);
    emb_off_ = ps_.add("time_embedding", {cfg_.steps, cfg_.hidden});
    conv_mid_ = nn::Conv3x3::create(ps_, "conv_mid", cfg_.hidden, cfg_.hidden);
    norm_mid_ = nn::GroupNorm::create(ps_, "norm_mid", cfg_.hidden, cfg_.groups);
    conv_res_ = nn::Conv3x3::create(ps_, "conv_res", cfg_.hidden, cfg_.hidden);
    norm_res_ = nn::GroupNorm::create(ps_, "norm_res", cfg_.hidden, cfg_.groups);
    conv_out_ = nn::Conv3x3::create(ps_, "conv_out", cfg_.hidden, cfg_.channels);
}

void NoisePredictor::init(std::uint64_t seed) {
    Rng rng(seed);
    conv_in_.init(ps_, rng);
    conv_mid_.init(ps_, rng);
    conv_res_.init(ps_, rng);
    conv_out_.init(ps_, rng, 0.5);
    norm_in_.init(ps_);
    norm_mid_.init(ps_);
    norm_res_.init(ps_);
    std::normal_distribution<double> n(0.0, 0.1);
    double* emb = ps_.value_ptr(emb_off_);
    for (std::size_t i = 0; i < cfg_.steps * cfg_.hidden; ++i)
        emb[i] = n(rng);
}

void NoisePredictor::forward_impl(const FeatureMap& x_t, const FeatureMap& y, std::size_t t, Cache& c) const {
    require_same_shape(x_t, y, "noise predictor");
    if (x_t.shape().channels != cfg_.channels)
        throw ConfigError("noise predictor expects " + std::to_string(cfg_.channels) + " channels");
    if (t < 1 || t > cfg_.steps)
        throw ConfigError("noise predictor step " + std::to_string(t) + " outside [1, " +
                          std::to_string(cfg_.steps) + "]");
    c.plane = {x_t.shape().height, x_t.shape().width};
    c.t = t;
    const std::size_t hw = c.plane.size();
    const std::size_t H = cfg_.hidden;

    c.input.resize(2 * cfg_.channels * hw);
    std::copy(x_t.data().begin(), x_t.data().end(), c.input.begin());
    std::copy(y.data().begin(), y.data().end(), c.input.begin() + static_cast<std::ptrdiff_t>(x_t.size()));

    auto layer = [&](const nn::Conv3x3& conv, const nn::GroupNorm& norm, std::span<const double> in,
                     std::vector<double>& col, std::vector<double>& a, std::vector<double>& n,
                     std::vector<double>& h, nn::GroupNormCache& gc) {
        a.resize(H * hw);
        n.resize(H * hw);
        h.resize(H * hw);
        conv.forward(ps_, in, c.plane, a, col);
        if (cfg_.use_norm)
            norm.forward(ps_, a, c.plane, n, gc);
        else
            n = a;
        if (cfg_.use_activation)
            nn::silu(n, h);
        else
            h = n;
    };

    layer(conv_in_, norm_in_, c.input, c.col_in, c.a1, c.n1, c.h1, c.g1);
    const double* emb = ps_.value_ptr(emb_off_) + (t - 1) * H;
    for (std::size_t ch = 0; ch < H; ++ch)
        for (std::size_t p = 0; p < hw; ++p)
            c.h1[ch * hw + p] += emb[ch];
    layer(conv_mid_, norm_mid_, c.h1, c.col_mid, c.a2, c.n2, c.h2, c.g2);
    layer(conv_res_, norm_res_, c.h2, c.col_res, c.a3, c.n3, c.h3, c.g3);
    for (std::size_t i = 0; i < c.h3.size(); ++i)
        c.h3[i] += c.h1[i];
    c.out.resize(cfg_.channels * hw);
    conv_out_.forward(ps_, c.h3, c.plane, c.out, c.col_out);
}

void NoisePredictor::backward_impl(Cache& c, std::span<const double> dout) {
    const std::size_t hw = c.plane.size();
    const std::size_t H = cfg_.hidden;
    std::vector<double> dh3(H * hw), dn(H * hw), da(H * hw), dh2(H * hw), dh1(H * hw);

    conv_out_.backward(ps_, c.col_out, dout, c.plane, dh3);

    auto layer_back = [&](const nn::Conv3x3& conv, const nn::GroupNorm& norm, std::vector<double>& col,
                          const std::vector<double>& a, const std::vector<double>& n, const nn::GroupNormCache& gc,
                          std::span<const double> dh, std::span<double> din) {
        if (cfg_.use_activation)
            nn::silu_backward(n, dh, dn);
        else
            std::copy(dh.begin(), dh.end(), dn.begin());
        if (cfg_.use_norm)
            norm.backward(ps_, gc, dn, c.plane, da);
        else
            std::copy(dn.begin(), dn.end(), da.begin());
        (void)a;
        conv.backward(ps_, col, da, c.plane, din);
    };

    // Residual block; h3 = act(...) + h1 so h1 receives dh3 directly.
    layer_back(conv_res_, norm_res_, c.col_res, c.a3, c.n3, c.g3, dh3, dh2);
    layer_back(conv_mid_, norm_mid_, c.col_mid, c.a2, c.n2, c.g2, dh2, dh1);
    for (std::size_t i = 0; i < dh1.size(); ++i)
        dh1[i] += dh3[i];

    double* demb = ps_.grad_ptr(emb_off_) + (c.t - 1) * H;
    for (std::size_t ch = 0; ch < H; ++ch)
        for (std::size_t p = 0; p < hw; ++p)
            demb[ch] += dh1[ch * hw + p];

    layer_back(conv_in_, norm_in_, c.col_in, c.a1, c.n1, c.g1, dh1, {});
}

FeatureMap NoisePredictor::forward(const FeatureMap& x_t, const FeatureMap& y, std::size_t t) const {
    Cache c;
    forward_impl(x_t, y, t, c);
    return FeatureMap(x_t.shape(), std::move(c.out), x_t.frame_id, x_t.cav_id);
}

namespace {

struct SampleTerms {
    double diffusion = 0.0;
    double coop = 0.0;
};

// Loss terms for one sample and (optionally) dL/d eps_hat, both already
// divided by the batch size.
SampleTerms sample_loss(std::span<const double> eps_hat, const TrainSample& s, const LossWeights& w,
                        const DiffusionSchedule& sched, std::size_t batch, std::vector<double>* grad) {
    const std::size_t n = eps_hat.size();
    const double inv = 1.0 / (static_cast<double>(n) * static_cast<double>(batch));
    const double ab = sched.alpha_bar(s.t);
    const double k_eps = std::sqrt(1.0 - ab) / std::sqrt(ab);
    const double views = static_cast<double>(w.fusion_views);
    auto tgt = s.target.data();
    auto xt = s.x_t.data();
    auto x0 = s.x0.data();
    const bool coop = w.coop != 0.0 && !s.x0.empty();
    SampleTerms out;
    if (grad)
        grad->assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = eps_hat[i] - tgt[i];
        out.diffusion += d * d * inv;
        if (grad)
            (*grad)[i] += w.diffusion * 2.0 * d * inv;
        if (coop) {
            // One-step estimate of x0 and its effect on a mean fusion.
            const double x0_hat = xt[i] / std::sqrt(ab) - k_eps * eps_hat[i];
            const double r = (x0_hat - x0[i]) / views;
            out.coop += r * r * inv;
            if (grad)
                (*grad)[i] += w.coop * 2.0 * r * inv * (-k_eps / views);
        }
    }
    return out;
}

void check_sample(const TrainSample& s, const DiffusionSchedule& sched) {
    require_same_shape(s.x_t, s.y, "training sample");
    require_same_shape(s.x_t, s.target, "training sample");
    if (!s.x0.empty())
        require_same_shape(s.x_t, s.x0, "training sample");
    if (s.t < 1 || s.t > sched.steps())
        throw ConfigError("training sample step outside the schedule");
}

} // namespace

LossValue NoisePredictor::loss_and_grad(std::span<const TrainSample> batch, const LossWeights& w,
                                        const DiffusionSchedule& sched) {
    if (batch.empty())
        throw ConfigError("empty training batch");
    ps_.zero_grad();
    LossValue total;
    Cache c;
    std::vector<double> grad;
    for (const auto& s : batch) {
        check_sample(s, sched);
        forward_impl(s.x_t, s.y, s.t, c);
        const auto terms = sample_loss(c.out, s, w, sched, batch.size(), &grad);
        total.diffusion += terms.diffusion;
        total.coop += terms.coop;
        backward_impl(c, grad);
    }
    total.total = w.diffusion * total.diffusion + w.coop * total.coop;
    if (!std::isfinite(total.total)) {
        std::ostringstream msg;
        msg << "noise predictor loss is not finite (diffusion=" << total.diffusion << ", coop=" << total.coop
            << ", params finite=" << (ps_.all_finite() ? "yes" : "no") << ")";
        throw NumericalError(msg.str());
    }
    return total;
}

LossValue NoisePredictor::loss(std::span<const TrainSample> batch, const LossWeights& w,
                               const DiffusionSchedule& sched) const {
    if (batch.empty())
        throw ConfigError("empty training batch");
    LossValue total;
    Cache c;
    for (const auto& s : batch) {
        check_sample(s, sched);
        forward_impl(s.x_t, s.y, s.t, c);
        const auto terms = sample_loss(c.out, s, w, sched, batch.size(), nullptr);
        total.diffusion += terms.diffusion;
        total.coop += terms.coop;
    }
    total.total = w.diffusion * total.diffusion + w.coop * total.coop;
    return total;
}

void NoisePredictor::write(std::ostream& out) const {
    binio::write_magic(out, "CWDP");
    binio::write_u32(out, kPredictorFileVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.channels));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.hidden));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.groups));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.steps));
    binio::write_u32(out, (cfg_.use_norm ? 1u : 0u) | (cfg_.use_activation ? 2u : 0u));
    ps_.write(out);
}

NoisePredictor NoisePredictor::read(std::istream& in) {
    binio::expect_magic(in, "CWDP");
    const auto version = binio::read_u32(in);
    if (version != kPredictorFileVersion)
        throw IoError("unsupported predictor file version " + std::to_string(version));
    PredictorConfig cfg;
    cfg.channels = binio::read_u32(in);
    cfg.hidden = binio::read_u32(in);
    cfg.groups = binio::read_u32(in);
    cfg.steps = binio::read_u32(in);
    const auto flags = binio::read_u32(in);
    cfg.use_norm = flags & 1u;
    cfg.use_activation = flags & 2u;
    NoisePredictor p(cfg);
    p.ps_.read(in);
    return p;
}

void NoisePredictor::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    write(out);
    if (!out)
        throw IoError("write failed: " + path.string());
}

NoisePredictor NoisePredictor::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ModelMissingError("denoiser model not found: " + path.string());
    return read(in);
}

double feature_rms(const FeatureMap& f) noexcept { return std::sqrt(mean_square(f)); }

FeatureMap denoise_feature(const NoisePredictor& model, const InferenceSchedule& infer, const FeatureMap& y,
                           std::uint64_t seed, std::size_t* calls) {
    const double s = feature_rms(y);
    if (!(s > 0.0))
        return y;
    const FeatureMap yn = (1.0 / s) * y;
    NoiseFn fn = [&](const FeatureMap& x, const FeatureMap& cond, std::size_t t) {
        if (calls)
            ++*calls;
        return model.forward(x, cond, t);
    };
    FeatureMap out = denoise(yn, fn, infer, seed);
    out *= s;
    out.frame_id = y.frame_id;
    out.cav_id = y.cav_id;
    return out;
}

std::vector<LossPoint> train_denoiser(NoisePredictor& model, const PairSource& source, const DiffusionSchedule& sched,
                                      const DenoiserTrainConfig& cfg, std::uint64_t seed) {
    if (cfg.batch == 0)
        throw ConfigError("denoiser batch size must be >= 1");
    if (!(cfg.snr_min_db <= cfg.snr_max_db))
        throw ConfigError("training SNR window is empty");
    if (model.config().steps != sched.steps())
        throw ConfigError("predictor step count does not match the schedule");

    Rng rng(seed);
    std::uniform_real_distribution<double> snr(cfg.snr_min_db, cfg.snr_max_db);
    std::uniform_int_distribution<std::size_t> step(1, sched.steps());
    nn::Adam opt;
    opt.lr = cfg.learning_rate;

    std::vector<LossPoint> curve;
    curve.reserve(cfg.steps);
    std::vector<TrainSample> batch(cfg.batch);
    double initial = 0.0;
    std::size_t above = 0;
    std::uint64_t counter = 0;
    for (std::size_t it = 0; it < cfg.steps; ++it) {
        for (auto& s : batch) {
            auto [x0, y] = source(derive_seed(seed, ++counter), snr(rng));
            const double scale = feature_rms(y);
            if (scale > 0.0) {
                x0 *= 1.0 / scale;
                y *= 1.0 / scale;
            }
            s.t = step(rng);
            auto d = forward_diffuse(x0, y, s.t, sched, derive_seed(seed, ++counter));
            s.target = training_target(x0, y, d.eps, s.t, sched);
            s.x_t = std::move(d.x_t);
            s.y = std::move(y);
            s.x0 = std::move(x0);
        }
        const auto loss = model.loss_and_grad(batch, cfg.weights, sched);
        opt.step(model.params());
        curve.push_back({it, loss.diffusion, loss.coop});

        if (it == 0)
            initial = loss.total;
        above = loss.total > cfg.divergence_factor * initial ? above + 1 : 0;
        if (above >= cfg.divergence_window)
            throw NumericalError("denoiser training diverged at step " + std::to_string(it) + " (loss " +
                                 std::to_string(loss.total) + ", initial " + std::to_string(initial) + ")");
    }
    return curve;
}

void write_loss_csv(std::ostream& out, std::span<const LossPoint> curve) {
    out << "step,loss_diffusion,loss_coop\n";
    out.precision(17);
    for (const auto& p : curve)
        out << p.step << ',' << p.loss_diffusion << ',' << p.loss_coop << '\n';
}

} // namespace coopwd
