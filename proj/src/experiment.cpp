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
#include "coopwd/experiment.hpp"

#include "coopwd/error.hpp"
#include "coopwd/rng.hpp"
#include "coopwd/symbols.hpp"

#include <chrono>
#include <cmath>

namespace coopwd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

FeatureMap to_air(const PipelineConfig& cfg, const FeatureMap& f) {
    return cfg.compress ? downsample2x(f) : f;
}

FeatureMap from_air(const PipelineConfig& cfg, const FeatureMap& f, Shape full) {
    return cfg.compress ? upsample2x(f, full) : f;
}

} // namespace

const char* to_string(Variant v) noexcept {
    switch (v) {
    case Variant::coop:
        return "coop";
    case Variant::coop_w:
        return "coop_w";
    case Variant::coop_d:
        return "coop_d";
    case Variant::coop_wd:
        return "coop_wd";
    case Variant::coop_wd_eco:
        return "coop_wd_eco";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    for (auto v : {Variant::coop, Variant::coop_w, Variant::coop_d, Variant::coop_wd, Variant::coop_wd_eco})
        if (name == to_string(v))
            return v;
    throw ConfigError("unknown variant '" + std::string(name) + "'");
}

ChannelKind parse_channel(std::string_view name) {
    for (auto k : {ChannelKind::flat_rician, ChannelKind::cir_taps, ChannelKind::tdl})
        if (name == to_string(k))
            return k;
    throw ConfigError("unknown channel '" + std::string(name) + "' (expected rician, v2v or tdl)");
}

bool uses_weighting(Variant v) noexcept {
    return v == Variant::coop_w || v == Variant::coop_wd || v == Variant::coop_wd_eco;
}

bool uses_denoiser(Variant v) noexcept {
    return v == Variant::coop_d || v == Variant::coop_wd || v == Variant::coop_wd_eco;
}

void PipelineConfig::validate() const {
    scene.validate();
    if (num_cavs < 1)
        throw ConfigError("num_cavs must be >= 1");
    if (slot_len < 2 || slot_len % 2 != 0)
        throw ConfigError("slot_len must be even and >= 2");
    if (!(p0 > 0.0) || !(distance_m > 0.0))
        throw ConfigError("p0 and distance_m must be > 0");
    if (compress && (scene.shape.height % 2 != 0 || scene.shape.width % 2 != 0))
        throw ConfigError("compression needs even map height and width");
    if (!(gate_threshold >= 0.0 && gate_threshold <= 1.0))
        throw ConfigError("gate threshold must lie in [0, 1]");
    rician.validate();
    v2v.validate();
    tdl.validate();
    link.validate();
    fusion.validate();
}

std::vector<SweepPoint> make_sweep(const std::vector<double>& snr_db, const std::vector<double>& pathloss_n,
                                   const std::vector<double>& sigma_snr_db, const std::vector<double>& sigma_csi) {
    if (snr_db.empty() || pathloss_n.empty() || sigma_snr_db.empty() || sigma_csi.empty())
        throw ConfigError("every sweep axis needs at least one value");
    std::vector<SweepPoint> pts;
    for (double s : snr_db)
        for (double n : pathloss_n)
            for (double ss : sigma_snr_db)
                for (double sc : sigma_csi) {
                    if (n < 0.0 || ss < 0.0 || sc < 0.0)
                        throw ConfigError("path-loss exponent and disturbance stds must be >= 0");
                    pts.push_back({pts.size(), s, n, ss, sc});
                }
    return pts;
}

SceneSeeds scene_seeds(std::uint64_t run_seed, std::size_t scene_index, std::size_t cav) {
    const std::uint64_t root = derive_seed(run_seed, scene_index);
    const std::uint64_t base = derive_seed(root, 1 + cav);
    return {derive_seed(root, 0), derive_seed(base, 0), derive_seed(base, 1), derive_seed(base, 2),
            derive_seed(base, 3)};
}

FeatureMap send_map(const PipelineConfig& cfg, const SweepPoint& pt, const FeatureMap& clean,
                    const SceneSeeds& seeds, LinkReport* report) {
    const FeatureMap src = to_air(cfg, clean);
    const SymbolFrame frame = to_symbols(src, cfg.slot_len);
    const std::size_t n_slots = frame.num_slots();
    const double gain = cfg.p0 / std::pow(cfg.distance_m, pt.pathloss_n);

    ChannelRealization ch;
    switch (cfg.channel) {
    case ChannelKind::flat_rician: {
        RicianConfig r = cfg.rician;
        r.p0 = cfg.p0;
        r.distance_m = cfg.distance_m;
        r.pathloss_n = pt.pathloss_n;
        ch = sample_rician(r, n_slots, seeds.channel);
        break;
    }
    case ChannelKind::cir_taps: {
        V2VChannelConfig v = cfg.v2v;
        v.path_gain = gain;
        ch = sample_v2v_cir(v, n_slots, seeds.channel);
        break;
    }
    case ChannelKind::tdl: {
        TdlProfile t = cfg.tdl;
        t.path_gain = gain;
        ch = sample_tdl(t, seeds.channel, n_slots);
        break;
    }
    }

    LinkConfig link = cfg.link;
    link.snr_db = pt.snr_db;
    if (pt.sigma_snr_db > 0.0 || pt.sigma_csi > 0.0) {
        const auto d = sample_disturbance({pt.sigma_snr_db, pt.sigma_csi}, n_slots, seeds.disturbance);
        if (pt.sigma_snr_db > 0.0)
            link.slot_snr_offset_db = d.snr_offset_db;
        if (pt.sigma_csi > 0.0)
            link.slot_csi_error_std = d.csi_error_std;
    }
    auto out = run_link(frame, ch, link, seeds.noise);
    FeatureMap rx = from_symbols(out.equalized, src.shape());
    rx.frame_id = clean.frame_id;
    rx.cav_id = clean.cav_id;
    if (report) {
        out.report.feature_mse = mse(rx, src);
        *report = std::move(out.report);
    }
    return rx;
}

TransmittedScene transmit_scene(const PipelineConfig& cfg, const SweepPoint& pt, std::uint64_t run_seed,
                                std::size_t scene_index) {
    TransmittedScene ts;
    ts.scene = generate_scene(cfg.scene, cfg.num_cavs, scene_seeds(run_seed, scene_index, 0).scene);
    const auto t0 = Clock::now();
    for (std::size_t k = 0; k < ts.scene.cavs.size(); ++k) {
        ts.seeds.push_back(scene_seeds(run_seed, scene_index, k));
        LinkReport rep;
        ts.received.push_back(send_map(cfg, pt, ts.scene.cavs[k], ts.seeds.back(), &rep));
        ts.erased_slots += rep.erased_count();
    }
    ts.link_seconds = seconds_since(t0);
    return ts;
}

StageTimes& StageTimes::operator+=(const StageTimes& o) noexcept {
    link += o.link;
    weighting += o.weighting;
    denoising += o.denoising;
    fusion += o.fusion;
    return *this;
}

SceneOutcome evaluate_scene(Variant v, const TransmittedScene& ts, const Models& models, const PipelineConfig& cfg) {
    if (uses_weighting(v) && !models.weighting)
        throw ModelMissingError(std::string("variant ") + to_string(v) + " needs a weighting model");
    if (uses_denoiser(v) && !models.denoise_fn && (!models.denoiser || !models.infer))
        throw ModelMissingError(std::string("variant ") + to_string(v) + " needs a denoiser model");

    SceneOutcome out;
    out.times.link = ts.link_seconds;
    const Shape full = ts.scene.ego.shape();
    const FeatureMap ego_air = uses_weighting(v) ? to_air(cfg, ts.scene.ego) : FeatureMap{};
    GatePolicy gate{cfg.gate_threshold};

    std::vector<FeatureMap> processed;
    processed.reserve(ts.received.size());
    for (std::size_t k = 0; k < ts.received.size(); ++k) {
        FeatureMap f = ts.received[k];
        const FeatureMap& clean = ts.scene.cavs[k];
        out.mse_pre += mse(from_air(cfg, f, full), clean);

        double w = 1.0;
        if (uses_weighting(v)) {
            const auto t0 = Clock::now();
            w = models.weighting->weight(ego_air, f);
            f = apply_weight(w, f);
            out.times.weighting += seconds_since(t0);
            out.weight_sum += w;
            ++out.weights;
        }
        if (uses_denoiser(v)) {
            const bool run = v != Variant::coop_wd_eco || gate.decide(w) == GateDecision::denoise;
            if (run) {
                const auto t0 = Clock::now();
                if (models.denoise_fn) {
                    f = models.denoise_fn(f, ts.seeds[k].denoise);
                    ++out.denoiser_calls;
                } else {
                    f = denoise_feature(*models.denoiser, *models.infer, f, ts.seeds[k].denoise, &out.denoiser_calls);
                }
                out.times.denoising += seconds_since(t0);
            }
        }
        f = from_air(cfg, f, full);
        f.require_finite("recovered feature");
        out.mse_post += mse(f, clean);
        processed.push_back(std::move(f));
    }
    out.bypasses = gate.bypasses;
    const double n = static_cast<double>(ts.received.size());
    out.mse_pre /= n;
    out.mse_post /= n;

    const auto t0 = Clock::now();
    const FeatureMap fused = fuse(cfg.fusion, ts.scene.ego, processed);
    const auto det = detect_and_score(fused, ts.scene.truth);
    out.times.fusion = seconds_since(t0);
    out.ap_loose = det.ap.at(0);
    out.ap_strict = det.ap.at(1);
    return out;
}

PointResult run_point(const PipelineConfig& cfg, const SweepPoint& pt, const std::vector<Variant>& variants,
                      const Models& models, std::uint64_t run_seed, std::size_t scenes) {
    if (variants.empty())
        throw ConfigError("no variants selected");
    if (scenes == 0)
        throw ConfigError("scenes per point must be >= 1");
    PointResult res;
    res.per_scene.assign(variants.size(), {});
    std::size_t erased = 0;
    for (std::size_t i = 0; i < scenes; ++i) {
        const auto ts = transmit_scene(cfg, pt, run_seed, i);
        erased += ts.erased_slots;
        for (std::size_t j = 0; j < variants.size(); ++j)
            res.per_scene[j].push_back(evaluate_scene(variants[j], ts, models, cfg));
    }

    for (std::size_t j = 0; j < variants.size(); ++j) {
        ExperimentRecord r;
        r.point_index = pt.index;
        r.seed = run_seed;
        r.variant = variants[j];
        r.channel = cfg.channel;
        r.point = pt;
        r.scenes = scenes;
        r.erased_slots = erased;
        double w_sum = 0.0;
        std::size_t w_count = 0, bypasses = 0;
        for (const auto& o : res.per_scene[j]) {
            r.ap_loose += o.ap_loose;
            r.ap_strict += o.ap_strict;
            r.mse_pre += o.mse_pre;
            r.mse_post += o.mse_post;
            w_sum += o.weight_sum;
            w_count += o.weights;
            bypasses += o.bypasses;
            r.denoiser_calls += o.denoiser_calls;
            r.times += o.times;
        }
        const double s = static_cast<double>(scenes);
        r.ap_loose /= s;
        r.ap_strict /= s;
        r.mse_pre /= s;
        r.mse_post /= s;
        if (w_count > 0)
            r.mean_w = w_sum / static_cast<double>(w_count);
        if (variants[j] == Variant::coop_wd_eco && w_count > 0)
            r.bypass_fraction = static_cast<double>(bypasses) / static_cast<double>(w_count);
        res.records.push_back(r);
    }
    return res;
}

PairSource make_pair_source(const PipelineConfig& cfg) {
    return [cfg](std::uint64_t seed, double snr_db) {
        const std::size_t k = static_cast<std::size_t>(seed % cfg.num_cavs);
        const auto seeds = scene_seeds(seed, 0, k);
        const Scene sc = generate_scene(cfg.scene, cfg.num_cavs, seeds.scene);
        SweepPoint pt;
        pt.snr_db = snr_db;
        FeatureMap y = send_map(cfg, pt, sc.cavs[k], seeds);
        return std::make_pair(to_air(cfg, sc.cavs[k]), std::move(y));
    };
}

TripletSource make_triplet_source(const PipelineConfig& cfg, double light_min_db, double light_max_db,
                                  double heavy_min_db, double heavy_max_db) {
    if (!(light_min_db <= light_max_db) || !(heavy_min_db <= heavy_max_db))
        throw ConfigError("triplet SNR ranges must be ordered");
    return [=](std::uint64_t seed) {
        const std::size_t k = static_cast<std::size_t>(seed % cfg.num_cavs);
        auto seeds = scene_seeds(seed, 0, k);
        const Scene sc = generate_scene(cfg.scene, cfg.num_cavs, seeds.scene);
        Rng rng(derive_seed(seed, 0x5eed));
        SweepPoint light, heavy;
        light.snr_db = std::uniform_real_distribution<double>(light_min_db, light_max_db)(rng);
        heavy.snr_db = std::uniform_real_distribution<double>(heavy_min_db, heavy_max_db)(rng);
        ContrastTriplet t{to_air(cfg, sc.ego), send_map(cfg, light, sc.cavs[k], seeds), {}};
        seeds.noise = derive_seed(seeds.noise, 1);
        t.heavy = send_map(cfg, heavy, sc.cavs[k], seeds);
        return t;
    };
}

} // namespace coopwd
