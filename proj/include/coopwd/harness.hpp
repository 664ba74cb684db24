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

#include "coopwd/config.hpp"
#include "coopwd/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace coopwd {

/// Models loaded for a set of variants.
class LoadedModels {
  public:
    /// Loads only what `variants` need. Throws ModelMissingError naming the
    /// first variant whose model file is absent.
    static LoadedModels load(const ExperimentConfig& cfg, const std::vector<Variant>& variants);
    LoadedModels() = default;
    LoadedModels(std::optional<NoisePredictor> denoiser, std::optional<WeightingModel> weighting,
                 const DiffusionSettings& diffusion);
    [[nodiscard]] Models view() const;

  private:
    std::optional<NoisePredictor> denoiser_;
    std::optional<WeightingModel> weighting_;
    std::optional<InferenceSchedule> infer_;
};

struct SweepOptions {
    std::size_t threads = 1;
    std::optional<Variant> only_variant;
};

/// Every experiment's variants x points x seeds. Records come back ordered by
/// experiment, point, seed and variant regardless of the thread count.
/// Child seed of seed index s: derive_seed(root_seed, s).
[[nodiscard]] std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& cfg, const Models& models,
                                                      const SweepOptions& opt = {});

/// Trains the noise predictor on pairs from the training pipeline. `curve`,
/// when given, receives the loss curve.
[[nodiscard]] NoisePredictor train_denoiser_from_config(const ExperimentConfig& cfg,
                                                        std::vector<LossPoint>* curve = nullptr);
[[nodiscard]] WeightingModel train_weighting_from_config(const ExperimentConfig& cfg,
                                                         WeightingTrainReport* report = nullptr);

/// Variants used by the config after the optional filter.
[[nodiscard]] std::vector<Variant> selected_variants(const ExperimentConfig& cfg, const SweepOptions& opt);

inline constexpr const char* kRecordsSchema = "# coopwd records v1";
inline constexpr const char* kRuntimeSchema = "# coopwd runtime v1";

/// Deterministic fields only; byte-identical for identical inputs.
void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
/// Per-stage wall times in seconds.
void write_runtime_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
/// Throws ConfigError with the line number on a schema mismatch or malformed row.
[[nodiscard]] std::vector<ExperimentRecord> read_records_csv(std::istream& in);
/// Merges runtime rows into records with matching keys.
void read_runtime_csv(std::istream& in, std::vector<ExperimentRecord>& records);

/// Markdown tables: proxy-AP per experiment (variants x points), a runtime
/// table when times are present, and gate statistics for eco variants.
[[nodiscard]] std::string report_markdown(const std::vector<ExperimentRecord>& records, bool with_runtime);

/// One SVG per (experiment, swept axis): proxy-AP against the axis, a line per
/// variant, averaged over seeds. Returns the files written.
std::vector<std::filesystem::path> write_plots(const std::vector<ExperimentRecord>& records,
                                               const std::filesystem::path& dir);

/// run_sweep plus records.csv, runtime.csv and plots under `dir`.
/// Throws IoError if the directory cannot be written.
std::vector<ExperimentRecord> run_and_write(const ExperimentConfig& cfg, const Models& models,
                                            const SweepOptions& opt, const std::filesystem::path& dir);

} // namespace coopwd
