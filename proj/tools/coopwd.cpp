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
#include "coopwd/config.hpp"
#include "coopwd/error.hpp"
#include "coopwd/harness.hpp"
#include "coopwd/rng.hpp"
#include "coopwd/scene.hpp"
#include "coopwd/tensor_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace coopwd;

namespace {

enum Exit { ok = 0, config_error = 2, model_missing = 3, numerical = 4 };

struct Args {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string variant;
    std::size_t threads = 1;
    std::string records;
    std::size_t count = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw IoError("cannot write " + p.string());
    return f;
}

int gen_scenes(const Args& a) {
    const auto cfg = load_config(a.config);
    const fs::path dir = a.out.empty() ? fs::path("scenes") : fs::path(a.out);
    const std::uint64_t seed = a.seed.value_or(cfg.root_seed);
    const std::size_t n = a.count > 0 ? a.count : cfg.experiments.front().scenes;
    std::ofstream truth = open_out(dir / "truth.csv");
    truth << "scene,object,row,col\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = generate_scene(cfg.pipeline.scene, cfg.pipeline.num_cavs, scene_seeds(seed, i, 0).scene);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu", i);
        save_tensor(dir / (std::string(name) + "_ego.cwdt"), s.ego);
        for (std::size_t k = 0; k < s.cavs.size(); ++k)
            save_tensor(dir / (std::string(name) + "_cav" + std::to_string(k + 1) + ".cwdt"), s.cavs[k]);
        for (std::size_t o = 0; o < s.truth.size(); ++o)
            truth << i << ',' << o << ',' << s.truth[o].row << ',' << s.truth[o].col << '\n';
    }
    std::cout << "wrote " << n << " scenes to " << dir.string() << '\n';
    return ok;
}

int train_den(const Args& a) {
    auto cfg = load_config(a.config);
    if (a.seed)
        cfg.train.denoiser_seed = *a.seed;
    const fs::path path = a.out.empty() ? cfg.models.denoiser : fs::path(a.out) / "denoiser.cwdp";
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<LossPoint> curve;
    const auto model = train_denoiser_from_config(cfg, &curve);
    std::ofstream probe = open_out(path);
    probe.close();
    model.save(path);
    fs::path loss_path = path;
    loss_path.replace_extension(".loss.csv");
    std::ofstream loss = open_out(loss_path);
    write_loss_csv(loss, curve);
    std::printf("denoiser: %zu parameters, loss %.4f -> %.4f in %.1f s; saved %s\n", model.parameter_count(),
                curve.front().loss_diffusion, curve.back().loss_diffusion, seconds_since(t0), path.c_str());
    return ok;
}

int train_wt(const Args& a) {
    auto cfg = load_config(a.config);
    if (a.seed)
        cfg.train.weighting_seed = *a.seed;
    const fs::path path = a.out.empty() ? cfg.models.weighting : fs::path(a.out) / "weighting.cwdw";
    const auto t0 = std::chrono::steady_clock::now();
    WeightingTrainReport rep;
    const auto model = train_weighting_from_config(cfg, &rep);
    std::ofstream probe = open_out(path);
    probe.close();
    model.save(path);
    std::printf("weighting: median similarity light %.3f heavy %.3f in %.1f s; saved %s\n",
                rep.median_light_similarity, rep.median_heavy_similarity, seconds_since(t0), path.c_str());
    return ok;
}

int run(const Args& a) {
    auto cfg = load_config(a.config);
    if (a.seed)
        cfg.root_seed = *a.seed;
    SweepOptions opt;
    opt.threads = a.threads;
    if (!a.variant.empty())
        opt.only_variant = parse_variant(a.variant);
    const auto models = LoadedModels::load(cfg, selected_variants(cfg, opt));
    const fs::path dir = a.out.empty() ? fs::path("results") : fs::path(a.out);
    const auto t0 = std::chrono::steady_clock::now();
    const auto recs = run_and_write(cfg, models.view(), opt, dir);
    std::printf("%zu records in %.1f s; wrote %s\n", recs.size(), seconds_since(t0), dir.c_str());
    return ok;
}

int report(const Args& a) {
    if (a.records.empty())
        throw ConfigError("report needs --records <file>");
    const fs::path path = a.records;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    auto recs = read_records_csv(in);
    bool with_runtime = false;
    const fs::path rt = path.parent_path() / "runtime.csv";
    if (std::ifstream r(rt, std::ios::binary); r) {
        read_runtime_csv(r, recs);
        with_runtime = true;
    }
    const std::string md = report_markdown(recs, with_runtime);
    if (a.out.empty()) {
        std::cout << md;
    } else {
        std::ofstream f = open_out(fs::path(a.out) / "report.md");
        f << md;
        write_plots(recs, a.out);
    }
    return ok;
}

int validate_schedule(const Args& a) {
    DiffusionSettings d;
    if (!a.config.empty())
        d = load_config(a.config).diffusion;
    const auto sched = d.schedule();
    const auto infer = d.inference();
    std::ostream* out = &std::cout;
    std::ofstream f;
    if (!a.out.empty()) {
        f = open_out(fs::path(a.out) / "schedule.csv");
        out = &f;
    }
    sched.write_csv(*out);
    std::fprintf(stderr, "schedule ok: T=%zu, m_T=%.6f, %zu-step sampler on training steps", sched.steps(),
                 sched.m(sched.steps()), infer.steps());
    for (auto t : infer.train_step)
        std::fprintf(stderr, " %zu", t);
    std::fprintf(stderr, "\n");
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"coopwd: cooperative-perception feature recovery simulator"};
    app.require_subcommand(1);
    Args a;
    auto common = [&](CLI::App* s, bool needs_config) {
        auto* c = s->add_option("--config", a.config, "JSON config file")->check(CLI::ExistingFile);
        if (needs_config)
            c->required();
        s->add_option("--seed", a.seed, "seed override");
        s->add_option("--out", a.out, "output directory");
    };
    auto* gen = app.add_subcommand("gen-scenes", "write toy scenes as tensors");
    common(gen, true);
    gen->add_option("--count", a.count, "number of scenes (default: first experiment's scenes)");
    auto* td = app.add_subcommand("train-denoiser", "train the noise predictor");
    common(td, true);
    auto* tw = app.add_subcommand("train-weighting", "train the weighting embedding");
    common(tw, true);
    auto* rn = app.add_subcommand("run", "run every experiment in the config");
    common(rn, true);
    rn->add_option("--variant", a.variant, "run only this variant");
    rn->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
    auto* rp = app.add_subcommand("report", "markdown tables from a records CSV");
    rp->add_option("--records", a.records, "records.csv")->required();
    rp->add_option("--out", a.out, "write report.md and plots here instead of stdout");
    auto* vs = app.add_subcommand("validate-schedule", "check and print the diffusion schedule");
    common(vs, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    try {
        if (*gen)
            return gen_scenes(a);
        if (*td)
            return train_den(a);
        if (*tw)
            return train_wt(a);
        if (*rn)
            return run(a);
        if (*rp)
            return report(a);
        return validate_schedule(a);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return config_error;
    } catch (const ModelMissingError& e) {
        std::cerr << "model missing: " << e.what() << '\n';
        return model_missing;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return numerical;
    }
}
