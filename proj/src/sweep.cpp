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
#include "coopwd/error.hpp"
#include "coopwd/harness.hpp"
#include "coopwd/rng.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

namespace coopwd {

LoadedModels::LoadedModels(std::optional<NoisePredictor> denoiser, std::optional<WeightingModel> weighting,
                           const DiffusionSettings& diffusion)
    : denoiser_(std::move(denoiser)), weighting_(std::move(weighting)) {
    if (denoiser_) {
        if (denoiser_->config().steps != diffusion.steps)
            throw ConfigError("denoiser was trained for " + std::to_string(denoiser_->config().steps) +
                              " steps, config says " + std::to_string(diffusion.steps));
        infer_ = diffusion.inference();
    }
}

LoadedModels LoadedModels::load(const ExperimentConfig& cfg, const std::vector<Variant>& variants) {
    std::optional<NoisePredictor> den;
    std::optional<WeightingModel> wm;
    for (auto v : variants) {
        try {
            if (uses_denoiser(v) && !den)
                den = NoisePredictor::load(cfg.models.denoiser);
            if (uses_weighting(v) && !wm)
                wm = WeightingModel::load(cfg.models.weighting);
        } catch (const ModelMissingError& e) {
            throw ModelMissingError(std::string("variant ") + to_string(v) + ": " + e.what());
        }
    }
    return LoadedModels(std::move(den), std::move(wm), cfg.diffusion);
}

Models LoadedModels::view() const {
    Models m;
    m.denoiser = denoiser_ ? &*denoiser_ : nullptr;
    m.weighting = weighting_ ? &*weighting_ : nullptr;
    m.infer = infer_;
    return m;
}

NoisePredictor train_denoiser_from_config(const ExperimentConfig& cfg, std::vector<LossPoint>* curve) {
    NoisePredictor model(cfg.train.predictor);
    model.init(cfg.train.denoiser_seed);
    auto c = train_denoiser(model, make_pair_source(cfg.training_pipeline()), cfg.diffusion.schedule(),
                            cfg.train.denoiser, derive_seed(cfg.train.denoiser_seed, 1));
    if (curve)
        *curve = std::move(c);
    return model;
}

WeightingModel train_weighting_from_config(const ExperimentConfig& cfg, WeightingTrainReport* report) {
    WeightingModel model(cfg.train.weighting_model);
    model.init(cfg.train.weighting_seed);
    const auto& t = cfg.train;
    auto r = train_weighting(model,
                             make_triplet_source(cfg.training_pipeline(), t.light_min_db, t.light_max_db,
                                                 t.heavy_min_db, t.heavy_max_db),
                             t.weighting, derive_seed(t.weighting_seed, 1));
    if (report)
        *report = std::move(r);
    return model;
}

std::vector<Variant> selected_variants(const ExperimentConfig& cfg, const SweepOptions& opt) {
    std::vector<Variant> out;
    for (const auto& e : cfg.experiments)
        for (auto v : e.variants)
            if ((!opt.only_variant || *opt.only_variant == v) && std::find(out.begin(), out.end(), v) == out.end())
                out.push_back(v);
    if (out.empty())
        throw ConfigError(std::string("no experiment uses variant ") +
                          (opt.only_variant ? to_string(*opt.only_variant) : "?"));
    return out;
}

std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& cfg, const Models& models, const SweepOptions& opt) {
    struct Job {
        std::size_t experiment;
        SweepPoint point;
        std::size_t seed_index;
        std::vector<Variant> variants;
    };
    std::vector<Job> jobs;
    for (std::size_t e = 0; e < cfg.experiments.size(); ++e) {
        const auto& spec = cfg.experiments[e];
        std::vector<Variant> vs;
        for (auto v : spec.variants)
            if (!opt.only_variant || *opt.only_variant == v)
                vs.push_back(v);
        if (vs.empty())
            continue;
        for (const auto& pt : spec.points())
            for (std::size_t s = 0; s < spec.seeds; ++s)
                jobs.push_back({e, pt, s, vs});
    }
    if (jobs.empty())
        throw ConfigError("the selected variant does not appear in any experiment");

    std::vector<std::vector<ExperimentRecord>> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            const auto& spec = cfg.experiments[job.experiment];
            try {
                const std::uint64_t seed = derive_seed(cfg.root_seed, job.seed_index);
                auto res = run_point(spec.pipeline, job.point, job.variants, models, seed, spec.scenes);
                for (auto& r : res.records) {
                    r.experiment = spec.name;
                    r.config_hash = cfg.hash;
                    r.seed_index = job.seed_index;
                }
                results[i] = std::move(res.records);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(opt.threads, 1, jobs.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    std::vector<ExperimentRecord> out;
    for (auto& r : results)
        for (auto& rec : r)
            out.push_back(std::move(rec));
    return out;
}

std::vector<ExperimentRecord> run_and_write(const ExperimentConfig& cfg, const Models& models,
                                            const SweepOptions& opt, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::ofstream records(dir / "records.csv", std::ios::binary);
    std::ofstream runtime(dir / "runtime.csv", std::ios::binary);
    if (!records || !runtime)
        throw IoError("output directory " + dir.string() + " is not writable");

    auto recs = run_sweep(cfg, models, opt);
    write_records_csv(records, recs);
    write_runtime_csv(runtime, recs);
    records.close();
    runtime.close();
    if (!records || !runtime)
        throw IoError("failed writing results to " + dir.string());
    write_plots(recs, dir);
    return recs;
}

} // namespace coopwd
