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
#include "coopwd/weighting.hpp"

#include "coopwd/error.hpp"
#include "coopwd/rng.hpp"
#include "coopwd/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace coopwd {

namespace {
constexpr std::uint32_t kWeightingFileVersion = 1;

double logit(double p) { return std::log(p / (1.0 - p)); }

double median(std::vector<double> v) {
    if (v.empty())
        return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1)
        return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// d cos(u, v) / du
void cosine_grad_u(std::span<const double> u, std::span<const double> v, double scale, std::vector<double>& du) {
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    if (nu == 0.0 || nv == 0.0)
        return;
    const double c = uv / (nu * nv);
    for (std::size_t i = 0; i < u.size(); ++i)
        du[i] += scale * (v[i] / (nu * nv) - c * u[i] / uu);
}
} // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) noexcept {
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0)
        return 0.0;
    return uv / std::sqrt(uu * vv);
}

WeightingModel::WeightingModel(WeightingConfig cfg) : cfg_(cfg) {
    if (cfg_.channels == 0 || cfg_.hidden == 0 || cfg_.embed_dim == 0)
        throw ConfigError("weighting model dimensions must be non-zero");
    conv1_ = nn::Conv3x3::create(ps_, "embed_conv1", cfg_.channels, cfg_.hidden);
    conv2_ = nn::Conv3x3::create(ps_, "embed_conv2", cfg_.hidden, cfg_.embed_dim);
    calib_off_ = ps_.add("calibration", {2});
}

void WeightingModel::init(std::uint64_t seed) {
    Rng rng(seed);
    conv1_.init(ps_, rng);
    conv2_.init(ps_, rng);
    set_calibration(0.0, 0.0);
}

void WeightingModel::set_calibration(double a, double b) noexcept {
    ps_.value_ptr(calib_off_)[0] = a;
    ps_.value_ptr(calib_off_)[1] = b;
}

std::vector<double> WeightingModel::embed_cached(const FeatureMap& f, EmbedCache& c) const {
    if (f.shape().channels != cfg_.channels)
        throw ConfigError("weighting model expects " + std::to_string(cfg_.channels) + " channels");
    c.plane = {f.shape().height, f.shape().width};
    const std::size_t hw = c.plane.size();
    c.a1.resize(cfg_.hidden * hw);
    c.h1.resize(cfg_.hidden * hw);
    c.a2.resize(cfg_.embed_dim * hw);
    conv1_.forward(ps_, f.data(), c.plane, c.a1, c.col1);
    nn::silu(c.a1, c.h1);
    conv2_.forward(ps_, c.h1, c.plane, c.a2, c.col2);
    std::vector<double> e(cfg_.embed_dim, 0.0);
    for (std::size_t k = 0; k < cfg_.embed_dim; ++k) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) {
            const double a = c.a2[k * hw + p];
            acc += a * nn::sigmoid(a);
        }
        e[k] = acc / static_cast<double>(hw);
    }
    return e;
}

void WeightingModel::embed_backward(EmbedCache& c, std::span<const double> de) {
    const std::size_t hw = c.plane.size();
    std::vector<double> dh2(cfg_.embed_dim * hw), da2(cfg_.embed_dim * hw);
    for (std::size_t k = 0; k < cfg_.embed_dim; ++k)
        for (std::size_t p = 0; p < hw; ++p)
            dh2[k * hw + p] = de[k] / static_cast<double>(hw);
    nn::silu_backward(c.a2, dh2, da2);
    std::vector<double> dh1(cfg_.hidden * hw), da1(cfg_.hidden * hw);
    conv2_.backward(ps_, c.col2, da2, c.plane, dh1);
    nn::silu_backward(c.a1, dh1, da1);
    conv1_.backward(ps_, c.col1, da1, c.plane, {});
}

std::vector<double> WeightingModel::embed(const FeatureMap& f) const {
    EmbedCache c;
    return embed_cached(f, c);
}

double WeightingModel::similarity(const FeatureMap& ego, const FeatureMap& cav) const {
    require_same_shape(ego, cav, "weighting");
    ego.require_finite("weighting input (ego)");
    cav.require_finite("weighting input (cav)");
    return cosine_similarity(embed(ego), embed(cav));
}

double WeightingModel::weight(const FeatureMap& ego, const FeatureMap& cav) const {
    const double c = similarity(ego, cav);
    return nn::sigmoid(scale() * c + offset());
}

void WeightingModel::write(std::ostream& out) const {
    binio::write_magic(out, "CWDW");
    binio::write_u32(out, kWeightingFileVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.channels));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.hidden));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg_.embed_dim));
    ps_.write(out);
}

WeightingModel WeightingModel::read(std::istream& in) {
    binio::expect_magic(in, "CWDW");
    const auto version = binio::read_u32(in);
    if (version != kWeightingFileVersion)
        throw IoError("unsupported weighting file version " + std::to_string(version));
    WeightingConfig cfg;
    cfg.channels = binio::read_u32(in);
    cfg.hidden = binio::read_u32(in);
    cfg.embed_dim = binio::read_u32(in);
    WeightingModel m(cfg);
    m.ps_.read(in);
    return m;
}

void WeightingModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    write(out);
    if (!out)
        throw IoError("write failed: " + path.string());
}

WeightingModel WeightingModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ModelMissingError("weighting model not found: " + path.string());
    return read(in);
}

FeatureMap apply_weight(double w, const FeatureMap& f) {
    if (!(w >= 0.0 && w <= 1.0))
        throw ConfigError("weight must lie in [0, 1]");
    FeatureMap out = f;
    out *= w;
    return out;
}

double contrastive_loss(std::span<const std::vector<double>> ego, std::span<const std::vector<double>> light,
                        std::span<const std::vector<double>> heavy, double temperature,
                        std::vector<std::vector<double>>* d_ego, std::vector<std::vector<double>>* d_light,
                        std::vector<std::vector<double>>* d_heavy) {
    const std::size_t B = ego.size();
    if (B == 0 || light.size() != B || heavy.size() != B)
        throw ConfigError("contrastive batch must hold matching ego/light/heavy sets");
    const std::size_t D = ego[0].size();
    const bool grad = d_ego && d_light && d_heavy;
    if (grad) {
        d_ego->assign(B, std::vector<double>(D, 0.0));
        d_light->assign(B, std::vector<double>(D, 0.0));
        d_heavy->assign(B, std::vector<double>(D, 0.0));
    }

    // Candidate j < B: light_j; j >= B: heavy_{j-B}. Light replicas of other
    // scenes and every heavy replica are negatives.
    double total = 0.0;
    std::vector<double> z(2 * B);
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            z[j] = cosine_similarity(ego[i], light[j]) / temperature;
            z[B + j] = cosine_similarity(ego[i], heavy[j]) / temperature;
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z)
            denom += std::exp(v - zmax);
        const double lse = zmax + std::log(denom);
        total += (lse - z[i]) / static_cast<double>(B);
        if (!grad)
            continue;
        for (std::size_t j = 0; j < 2 * B; ++j) {
            const double p = std::exp(z[j] - lse);
            const double g = (p - (j == i ? 1.0 : 0.0)) / (temperature * static_cast<double>(B));
            const auto& other = j < B ? light[j] : heavy[j - B];
            auto& d_other = j < B ? (*d_light)[j] : (*d_heavy)[j - B];
            cosine_grad_u(ego[i], other, g, (*d_ego)[i]);
            cosine_grad_u(other, ego[i], g, d_other);
        }
    }
    return total;
}

WeightingTrainReport train_weighting(WeightingModel& model, const TripletSource& source,
                                     const WeightingTrainConfig& cfg, std::uint64_t seed) {
    if (cfg.batch < 2)
        throw ConfigError("contrastive training needs a batch of at least 2 scenes");
    if (!(cfg.temperature > 0.0))
        throw ConfigError("contrastive temperature must be > 0");
    if (!(cfg.light_target > cfg.heavy_target && cfg.heavy_target > 0.0 && cfg.light_target < 1.0))
        throw ConfigError("calibration targets must satisfy 0 < heavy < light < 1");

    nn::Adam opt;
    opt.lr = cfg.learning_rate;
    WeightingTrainReport report;
    std::uint64_t counter = 0;
    const std::size_t B = cfg.batch;

    for (std::size_t it = 0; it < cfg.steps; ++it) {
        std::vector<ContrastTriplet> batch;
        batch.reserve(B);
        for (std::size_t i = 0; i < B; ++i)
            batch.push_back(source(derive_seed(seed, ++counter)));

        std::vector<WeightingModel::EmbedCache> ce(B), cl(B), ch(B);
        std::vector<std::vector<double>> ee(B), el(B), eh(B);
        for (std::size_t i = 0; i < B; ++i) {
            ee[i] = model.embed_cached(batch[i].ego, ce[i]);
            el[i] = model.embed_cached(batch[i].light, cl[i]);
            eh[i] = model.embed_cached(batch[i].heavy, ch[i]);
        }
        std::vector<std::vector<double>> de, dl, dh;
        const double loss = contrastive_loss(ee, el, eh, cfg.temperature, &de, &dl, &dh);
        if (!std::isfinite(loss))
            throw NumericalError("weighting contrastive loss is not finite at step " + std::to_string(it));
        model.params().zero_grad();
        for (std::size_t i = 0; i < B; ++i) {
            model.embed_backward(ce[i], de[i]);
            model.embed_backward(cl[i], dl[i]);
            model.embed_backward(ch[i], dh[i]);
        }
        // The calibration pair is fitted afterwards, not by gradient.
        const auto& cal = model.params().entry("calibration");
        std::fill_n(model.params().grad_ptr(cal.offset), cal.size, 0.0);
        const double a = model.scale();
        const double b = model.offset();
        opt.step(model.params());
        model.set_calibration(a, b);
        report.loss.push_back(loss);
    }

    // Calibration on a fresh pool from the training generator.
    std::vector<double> light_sim, heavy_sim;
    std::vector<std::vector<double>> pool_embeddings;
    for (std::size_t i = 0; i < cfg.calibration_pool; ++i) {
        const auto tri = source(derive_seed(seed, ++counter));
        const auto e = model.embed(tri.ego);
        const auto l = model.embed(tri.light);
        const auto h = model.embed(tri.heavy);
        light_sim.push_back(cosine_similarity(e, l));
        heavy_sim.push_back(cosine_similarity(e, h));
        pool_embeddings.push_back(l);
        pool_embeddings.push_back(h);
    }
    double spread = 0.0;
    for (std::size_t k = 0; k < model.config().embed_dim; ++k) {
        double mean = 0.0, var = 0.0;
        for (const auto& e : pool_embeddings)
            mean += e[k];
        mean /= static_cast<double>(pool_embeddings.size());
        for (const auto& e : pool_embeddings)
            var += (e[k] - mean) * (e[k] - mean);
        spread += var;
    }
    report.median_light_similarity = median(light_sim);
    report.median_heavy_similarity = median(heavy_sim);
    const double gap = report.median_light_similarity - report.median_heavy_similarity;
    if (!(spread > 1e-12) || !(gap > 1e-9))
        throw NumericalError("weighting embeddings are degenerate (variance " + std::to_string(spread) +
                             ", light-heavy similarity gap " + std::to_string(gap) + ")");
    const double a = (logit(cfg.light_target) - logit(cfg.heavy_target)) / gap;
    const double b = logit(cfg.light_target) - a * report.median_light_similarity;
    model.set_calibration(a, b);
    return report;
}

GateDecision GatePolicy::decide(double w) {
    if (w < threshold) {
        ++bypasses;
        return GateDecision::bypass;
    }
    ++invocations;
    return GateDecision::denoise;
}

} // namespace coopwd
