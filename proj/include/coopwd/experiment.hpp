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

#include "coopwd/channel.hpp"
#include "coopwd/diffusion.hpp"
#include "coopwd/fusion.hpp"
#include "coopwd/link.hpp"
#include "coopwd/noise_predictor.hpp"
#include "coopwd/scene.hpp"
#include "coopwd/weighting.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coopwd {

enum class Variant { coop, coop_w, coop_d, coop_wd, coop_wd_eco };

[[nodiscard]] const char* to_string(Variant v) noexcept;
/// Throws ConfigError for an unknown name.
[[nodiscard]] Variant parse_variant(std::string_view name);
[[nodiscard]] ChannelKind parse_channel(std::string_view name);
[[nodiscard]] bool uses_weighting(Variant v) noexcept;
[[nodiscard]] bool uses_denoiser(Variant v) noexcept;

/// Everything needed to turn a seed into transmitted scenes.
struct PipelineConfig {
    SceneSpec scene{};
    std::size_t num_cavs = 2;
    ChannelKind channel = ChannelKind::cir_taps;
    RicianConfig rician{};
    V2VChannelConfig v2v{};
    TdlProfile tdl{};
    LinkConfig link{};
    /// Large-scale loss p0 / d^n applied to every channel kind.
    double p0 = 1.0;
    double distance_m = 1.0;
    std::size_t slot_len = 64;
    /// 2x average-pool before transmission, nearest upsample after.
    bool compress = false;
    FusionConfig fusion{FusionMode::softmax_attention, 0.1};
    double gate_threshold = 0.6;
    std::vector<double> fast_levels = default_fast_levels();

    void validate() const;
};

struct SweepPoint {
    std::size_t index = 0;
    double snr_db = 20.0;
    double pathloss_n = 0.0;
    double sigma_snr_db = 0.0;
    double sigma_csi = 0.0;
};

/// Cartesian product in the order snr, n, sigma_snr, sigma_csi (last fastest).
/// Throws ConfigError if any axis is empty.
[[nodiscard]] std::vector<SweepPoint> make_sweep(const std::vector<double>& snr_db, const std::vector<double>& pathloss_n,
                                                 const std::vector<double>& sigma_snr_db,
                                                 const std::vector<double>& sigma_csi);

/// Seeds of one scene. The channel, noise and disturbance streams do not depend
/// on the sweep point, so outcomes are paired across points and variants.
struct SceneSeeds {
    std::uint64_t scene;
    std::uint64_t channel;
    std::uint64_t noise;
    std::uint64_t disturbance;
    std::uint64_t denoise;
};
[[nodiscard]] SceneSeeds scene_seeds(std::uint64_t run_seed, std::size_t scene_index, std::size_t cav);

/// One clean map sent over the configured channel at a sweep point.
[[nodiscard]] FeatureMap send_map(const PipelineConfig& cfg, const SweepPoint& pt, const FeatureMap& clean,
                                  const SceneSeeds& seeds, LinkReport* report = nullptr);

/// Clean scene plus every CAV map as received.
struct TransmittedScene {
    Scene scene;
    std::vector<FeatureMap> received;
    std::vector<SceneSeeds> seeds; ///< per CAV
    std::size_t erased_slots = 0;
    double link_seconds = 0.0;
};
[[nodiscard]] TransmittedScene transmit_scene(const PipelineConfig& cfg, const SweepPoint& pt, std::uint64_t run_seed,
                                              std::size_t scene_index);

/// Trained models; a pointer may be null when no selected variant needs it.
struct Models {
    const NoisePredictor* denoiser = nullptr;
    const WeightingModel* weighting = nullptr;
    std::optional<InferenceSchedule> infer;
    /// When set, replaces the trained denoiser: (received map, seed) -> recovered map.
    std::function<FeatureMap(const FeatureMap&, std::uint64_t)> denoise_fn;
};

struct StageTimes {
    double link = 0.0;
    double weighting = 0.0;
    double denoising = 0.0;
    double fusion = 0.0;
    [[nodiscard]] double recovery() const noexcept { return weighting + denoising; }
    [[nodiscard]] double total() const noexcept { return link + weighting + denoising + fusion; }
    StageTimes& operator+=(const StageTimes& o) noexcept;
};

struct SceneOutcome {
    double ap_loose = 0.0;
    double ap_strict = 0.0;
    double mse_pre = 0.0;  ///< received vs clean, mean over CAVs
    double mse_post = 0.0; ///< after the recovery stack
    double weight_sum = 0.0;
    std::size_t weights = 0;
    std::size_t bypasses = 0;
    std::size_t denoiser_calls = 0;
    StageTimes times{};
    [[nodiscard]] double ap() const noexcept { return 0.5 * (ap_loose + ap_strict); }
};

/// Recovery stack weight -> gate -> denoise, then fusion and proxy-AP.
/// Throws ModelMissingError naming the variant when a required model is absent.
[[nodiscard]] SceneOutcome evaluate_scene(Variant v, const TransmittedScene& ts, const Models& models,
                                          const PipelineConfig& cfg);

/// Deterministic fields of one (variant, point, seed) cell.
struct ExperimentRecord {
    std::string experiment;
    std::string config_hash;
    std::size_t point_index = 0;
    std::size_t seed_index = 0;
    std::uint64_t seed = 0;
    Variant variant = Variant::coop;
    ChannelKind channel = ChannelKind::cir_taps;
    SweepPoint point{};
    std::size_t scenes = 0;
    double ap_loose = 0.0;
    double ap_strict = 0.0;
    double mse_pre = 0.0;
    double mse_post = 0.0;
    double mean_w = 1.0;
    double bypass_fraction = 0.0;
    std::size_t denoiser_calls = 0;
    std::size_t erased_slots = 0;
    StageTimes times{}; ///< written to the runtime file only
};

struct PointResult {
    std::vector<ExperimentRecord> records;       ///< one per variant, in input order
    std::vector<std::vector<SceneOutcome>> per_scene; ///< [variant][scene]
};

/// Evaluates all variants on the same `scenes` transmitted scenes.
[[nodiscard]] PointResult run_point(const PipelineConfig& cfg, const SweepPoint& pt, const std::vector<Variant>& variants,
                                    const Models& models, std::uint64_t run_seed, std::size_t scenes);

/// Training-data generators drawn from the pipeline at a given SNR.
[[nodiscard]] PairSource make_pair_source(const PipelineConfig& cfg);
/// Light replica at SNR ~ U[light_min, light_max], heavy at U[heavy_min, heavy_max].
[[nodiscard]] TripletSource make_triplet_source(const PipelineConfig& cfg, double light_min_db = 15.0,
                                                double light_max_db = 25.0, double heavy_min_db = -5.0,
                                                double heavy_max_db = 0.0);

} // namespace coopwd
