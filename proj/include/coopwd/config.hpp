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
#include "coopwd/experiment.hpp"
#include "coopwd/noise_predictor.hpp"
#include "coopwd/weighting.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace coopwd {

struct DiffusionSettings {
    std::size_t steps = 50;
    double beta_min = 1e-4;
    double beta_max = 0.035;
    std::vector<double> fast_levels = default_fast_levels();
    ReverseVariance variance = ReverseVariance::posterior;

    [[nodiscard]] DiffusionSchedule schedule() const;
    [[nodiscard]] InferenceSchedule inference() const;
};

struct ModelPaths {
    std::filesystem::path denoiser = "models/denoiser.cwdp";
    std::filesystem::path weighting = "models/weighting.cwdw";
};

struct TrainSettings {
    /// Channel used to generate training pairs and triplets.
    ChannelKind channel = ChannelKind::cir_taps;
    PredictorConfig predictor{};
    DenoiserTrainConfig denoiser{};
    std::uint64_t denoiser_seed = 1;
    WeightingConfig weighting_model{};
    WeightingTrainConfig weighting{};
    std::uint64_t weighting_seed = 2;
    double light_min_db = 15.0;
    double light_max_db = 25.0;
    double heavy_min_db = -5.0;
    double heavy_max_db = 0.0;
};

/// One sweep: variants x sweep points x seeds, each cell averaging `scenes` scenes.
struct ExperimentSpec {
    std::string name;
    std::vector<Variant> variants;
    std::vector<double> snr_db{20.0};
    std::vector<double> pathloss_n{0.0};
    std::vector<double> sigma_snr_db{0.0};
    std::vector<double> sigma_csi{0.0};
    std::size_t scenes = 20;
    std::size_t seeds = 1;
    PipelineConfig pipeline{};

    [[nodiscard]] std::vector<SweepPoint> points() const;
};

struct ExperimentConfig {
    std::uint64_t root_seed = 1;
    PipelineConfig pipeline{}; ///< base settings, before per-experiment overrides
    DiffusionSettings diffusion{};
    ModelPaths models{};
    TrainSettings train{};
    std::vector<ExperimentSpec> experiments;
    /// FNV-1a of the canonical (key-sorted, compact) JSON document.
    std::string hash;

    /// Pipeline used for training: the base pipeline on the training channel.
    [[nodiscard]] PipelineConfig training_pipeline() const;
};

/// Parses a JSON document. Relative model paths are resolved against base_dir.
/// Throws ConfigError naming the offending key.
[[nodiscard]] ExperimentConfig parse_config(std::string_view json_text,
                                            const std::filesystem::path& base_dir = {});
/// Throws IoError if the file cannot be read, ConfigError if it is invalid.
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

[[nodiscard]] std::string fnv1a_hex(std::string_view bytes);

} // namespace coopwd
