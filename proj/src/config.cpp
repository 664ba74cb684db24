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

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <span>
#include <sstream>

namespace coopwd {

namespace {

using json = nlohmann::json;

std::string join(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
}

void check_object(const json& j, const std::string& where, std::span<const std::string_view> allowed) {
    if (!j.is_object())
        throw ConfigError(where + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (auto a : allowed)
            ok = ok || item.key() == a;
        if (!ok)
            throw ConfigError("unknown key '" + join(where, item.key()) + "'");
    }
}

void check_object(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    check_object(j, where, std::span<const std::string_view>(allowed.begin(), allowed.size()));
}

const json* find(const json& j, std::string_view key) {
    const auto it = j.find(std::string(key));
    return it == j.end() ? nullptr : &*it;
}

void read(const json& j, std::string_view key, const std::string& where, double& out) {
    if (const json* v = find(j, key)) {
        if (!v->is_number())
            throw ConfigError(join(where, key) + " must be a number");
        out = v->get<double>();
    }
}

void read(const json& j, std::string_view key, const std::string& where, std::size_t& out) {
    if (const json* v = find(j, key)) {
        if (!v->is_number_unsigned())
            throw ConfigError(join(where, key) + " must be a non-negative integer");
        out = v->get<std::size_t>();
    }
}

void read_seed(const json& j, std::string_view key, const std::string& where, std::uint64_t& out) {
    if (const json* v = find(j, key)) {
        if (!v->is_number_unsigned())
            throw ConfigError(join(where, key) + " must be a non-negative integer");
        out = v->get<std::uint64_t>();
    }
}

void read(const json& j, std::string_view key, const std::string& where, bool& out) {
    if (const json* v = find(j, key)) {
        if (!v->is_boolean())
            throw ConfigError(join(where, key) + " must be true or false");
        out = v->get<bool>();
    }
}

void read(const json& j, std::string_view key, const std::string& where, std::string& out) {
    if (const json* v = find(j, key)) {
        if (!v->is_string())
            throw ConfigError(join(where, key) + " must be a string");
        out = v->get<std::string>();
    }
}

void read(const json& j, std::string_view key, const std::string& where, std::vector<double>& out) {
    if (const json* v = find(j, key)) {
        if (!v->is_array())
            throw ConfigError(join(where, key) + " must be a list of numbers");
        out.clear();
        for (const auto& e : *v) {
            if (!e.is_number())
                throw ConfigError(join(where, key) + " must be a list of numbers");
            out.push_back(e.get<double>());
        }
    }
}

std::pair<double, double> read_pair(const json& e, const std::string& where) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ConfigError(where + " entries must be [number, number] pairs");
    return {e[0].get<double>(), e[1].get<double>()};
}

void read_range(const json& j, std::string_view key, const std::string& where, double& lo, double& hi) {
    if (const json* v = find(j, key)) {
        const auto [a, b] = read_pair(*v, join(where, key));
        if (!(a <= b))
            throw ConfigError(join(where, key) + " must be [min, max] with min <= max");
        lo = a;
        hi = b;
    }
}

MotionProfile parse_motion(const json& j, const std::string& where, MotionProfile m) {
    check_object(j, where, {"v0", "accel", "headings"});
    read(j, "v0", where, m.v0);
    read(j, "accel", where, m.accel);
    if (const json* h = find(j, "headings")) {
        if (!h->is_array())
            throw ConfigError(join(where, "headings") + " must be a list of [time_s, rad] pairs");
        m.heading_segments.clear();
        for (const auto& e : *h)
            m.heading_segments.push_back(read_pair(e, join(where, "headings")));
    }
    return m;
}

PipelineConfig parse_pipeline(const json& root) {
    PipelineConfig p;
    if (const json* s = find(root, "scene")) {
        const std::string w = "scene";
        check_object(*s, w,
                     {"channels", "height", "width", "num_objects", "blob_amplitude", "blob_sigma", "background_std",
                      "min_separation", "margin", "num_cavs", "object_centers"});
        read(*s, "channels", w, p.scene.shape.channels);
        read(*s, "height", w, p.scene.shape.height);
        read(*s, "width", w, p.scene.shape.width);
        read(*s, "num_objects", w, p.scene.num_objects);
        read(*s, "blob_amplitude", w, p.scene.blob_amplitude);
        read(*s, "blob_sigma", w, p.scene.blob_sigma);
        read(*s, "background_std", w, p.scene.background_std);
        read(*s, "min_separation", w, p.scene.min_separation);
        read(*s, "margin", w, p.scene.margin);
        read(*s, "num_cavs", w, p.num_cavs);
        if (const json* c = find(*s, "object_centers")) {
            if (!c->is_array())
                throw ConfigError("scene.object_centers must be a list of [row, col] pairs");
            for (const auto& e : *c) {
                const auto [r, col] = read_pair(e, "scene.object_centers");
                p.scene.object_centers.push_back({r, col});
            }
        }
    }
    if (const json* l = find(root, "link")) {
        const std::string w = "link";
        check_object(*l, w,
                     {"snr_reference", "pilots_per_slot", "csi_mode", "extra_csi_error_std", "zf_epsilon_rel",
                      "slot_len", "p0", "distance_m"});
        std::string ref = "receiver", csi = "ls_estimate";
        read(*l, "snr_reference", w, ref);
        read(*l, "csi_mode", w, csi);
        if (ref == "receiver")
            p.link.snr_reference = SnrReference::receiver;
        else if (ref == "transmitter")
            p.link.snr_reference = SnrReference::transmitter;
        else
            throw ConfigError("link.snr_reference must be 'receiver' or 'transmitter'");
        if (csi == "perfect")
            p.link.csi_mode = CsiMode::perfect;
        else if (csi == "ls_estimate")
            p.link.csi_mode = CsiMode::ls_estimate;
        else
            throw ConfigError("link.csi_mode must be 'perfect' or 'ls_estimate'");
        read(*l, "pilots_per_slot", w, p.link.pilots_per_slot);
        read(*l, "extra_csi_error_std", w, p.link.extra_csi_error_std);
        read(*l, "zf_epsilon_rel", w, p.link.zf_epsilon_rel);
        read(*l, "slot_len", w, p.slot_len);
        read(*l, "p0", w, p.p0);
        read(*l, "distance_m", w, p.distance_m);
    }
    if (const json* c = find(root, "channels")) {
        check_object(*c, "channels", {"rician", "v2v", "tdl"});
        if (const json* r = find(*c, "rician")) {
            const std::string w = "channels.rician";
            check_object(*r, w, {"k_factor", "k_walk_std", "los_phase"});
            read(*r, "k_factor", w, p.rician.k_factor);
            read(*r, "k_walk_std", w, p.rician.k_walk_std);
            read(*r, "los_phase", w, p.rician.los_phase);
        }
        if (const json* v = find(*c, "v2v")) {
            const std::string w = "channels.v2v";
            check_object(*v, w,
                         {"num_paths", "rays_per_path", "wavelength_m", "tx", "rx", "aod_spread_rad", "aoa_spread_rad",
                          "power_decay_per_s", "delay_spread_s", "slot_duration_s", "symbol_period_s",
                          "los_first_path"});
            auto& g = p.v2v;
            read(*v, "num_paths", w, g.num_paths);
            read(*v, "rays_per_path", w, g.rays_per_path);
            read(*v, "wavelength_m", w, g.wavelength_m);
            if (const json* m = find(*v, "tx"))
                g.tx = parse_motion(*m, w + ".tx", g.tx);
            if (const json* m = find(*v, "rx"))
                g.rx = parse_motion(*m, w + ".rx", g.rx);
            read(*v, "aod_spread_rad", w, g.aod_spread_rad);
            read(*v, "aoa_spread_rad", w, g.aoa_spread_rad);
            read(*v, "power_decay_per_s", w, g.power_decay_per_s);
            read(*v, "delay_spread_s", w, g.delay_spread_s);
            read(*v, "slot_duration_s", w, g.slot_duration_s);
            read(*v, "symbol_period_s", w, g.symbol_period_s);
            read(*v, "los_first_path", w, g.los_first_path);
        }
        if (const json* t = find(*c, "tdl")) {
            const std::string w = "channels.tdl";
            check_object(*t, w, {"taps", "symbol_period_s"});
            read(*t, "symbol_period_s", w, p.tdl.symbol_period_s);
            if (const json* taps = find(*t, "taps")) {
                if (!taps->is_array())
                    throw ConfigError("channels.tdl.taps must be a list of [delay_s, power] pairs");
                p.tdl.taps.clear();
                for (const auto& e : *taps) {
                    const auto [d, pw] = read_pair(e, "channels.tdl.taps");
                    p.tdl.taps.push_back({d, pw});
                }
            }
        }
    }
    if (const json* f = find(root, "fusion")) {
        check_object(*f, "fusion", {"mode", "temperature"});
        std::string mode = "softmax_attention";
        read(*f, "mode", "fusion", mode);
        if (mode == "mean")
            p.fusion.mode = FusionMode::mean;
        else if (mode == "softmax_attention")
            p.fusion.mode = FusionMode::softmax_attention;
        else
            throw ConfigError("fusion.mode must be 'mean' or 'softmax_attention'");
        read(*f, "temperature", "fusion", p.fusion.temperature);
    }
    if (const json* g = find(root, "gate")) {
        check_object(*g, "gate", {"threshold"});
        read(*g, "threshold", "gate", p.gate_threshold);
    }
    read(root, "compress", "", p.compress);
    return p;
}

DiffusionSettings parse_diffusion(const json& j) {
    DiffusionSettings d;
    const std::string w = "diffusion";
    check_object(j, w, {"steps", "beta_min", "beta_max", "fast_levels", "reverse_variance"});
    read(j, "steps", w, d.steps);
    read(j, "beta_min", w, d.beta_min);
    read(j, "beta_max", w, d.beta_max);
    read(j, "fast_levels", w, d.fast_levels);
    std::string var = "posterior";
    read(j, "reverse_variance", w, var);
    if (var == "posterior")
        d.variance = ReverseVariance::posterior;
    else if (var == "inverted_ratio")
        d.variance = ReverseVariance::inverted_ratio;
    else
        throw ConfigError("diffusion.reverse_variance must be 'posterior' or 'inverted_ratio'");
    return d;
}

void parse_train(const json& j, TrainSettings& t) {
    check_object(j, "train", {"channel", "denoiser", "weighting"});
    if (const json* c = find(j, "channel")) {
        if (!c->is_string())
            throw ConfigError("train.channel must be a string");
        t.channel = parse_channel(c->get<std::string>());
    }
    if (const json* d = find(j, "denoiser")) {
        const std::string w = "train.denoiser";
        check_object(*d, w,
                     {"steps", "batch", "learning_rate", "snr_db", "beta_diffusion", "beta_coop", "fusion_views",
                      "hidden", "groups", "seed"});
        read(*d, "steps", w, t.denoiser.steps);
        read(*d, "batch", w, t.denoiser.batch);
        read(*d, "learning_rate", w, t.denoiser.learning_rate);
        read_range(*d, "snr_db", w, t.denoiser.snr_min_db, t.denoiser.snr_max_db);
        read(*d, "beta_diffusion", w, t.denoiser.weights.diffusion);
        read(*d, "beta_coop", w, t.denoiser.weights.coop);
        read(*d, "fusion_views", w, t.denoiser.weights.fusion_views);
        read(*d, "hidden", w, t.predictor.hidden);
        read(*d, "groups", w, t.predictor.groups);
        read_seed(*d, "seed", w, t.denoiser_seed);
    }
    if (const json* d = find(j, "weighting")) {
        const std::string w = "train.weighting";
        check_object(*d, w,
                     {"steps", "batch", "learning_rate", "temperature", "calibration_pool", "light_target",
                      "heavy_target", "hidden", "embed_dim", "seed", "light_snr_db", "heavy_snr_db"});
        read(*d, "steps", w, t.weighting.steps);
        read(*d, "batch", w, t.weighting.batch);
        read(*d, "learning_rate", w, t.weighting.learning_rate);
        read(*d, "temperature", w, t.weighting.temperature);
        read(*d, "calibration_pool", w, t.weighting.calibration_pool);
        read(*d, "light_target", w, t.weighting.light_target);
        read(*d, "heavy_target", w, t.weighting.heavy_target);
        read(*d, "hidden", w, t.weighting_model.hidden);
        read(*d, "embed_dim", w, t.weighting_model.embed_dim);
        read_seed(*d, "seed", w, t.weighting_seed);
        read_range(*d, "light_snr_db", w, t.light_min_db, t.light_max_db);
        read_range(*d, "heavy_snr_db", w, t.heavy_min_db, t.heavy_max_db);
    }
}

constexpr std::array<std::string_view, 6> kPipelineKeys = {"scene", "link", "channels", "fusion", "gate", "compress"};

ExperimentSpec parse_experiment(const json& e, std::size_t index, const json& base) {
    const std::string w = "experiments[" + std::to_string(index) + "]";
    check_object(e, w, {"name", "channel", "variants", "sweep", "scenes", "seeds", "overrides"});
    ExperimentSpec spec;
    spec.name = "exp" + std::to_string(index);
    read(e, "name", w, spec.name);
    if (spec.name.empty() || spec.name.find_first_of(",\"\n\r") != std::string::npos)
        throw ConfigError(w + ".name must be non-empty and free of commas, quotes and newlines");

    json merged = base;
    if (const json* o = find(e, "overrides")) {
        check_object(*o, w + ".overrides", kPipelineKeys);
        merged.merge_patch(*o);
    }
    spec.pipeline = parse_pipeline(merged);
    std::string channel = "v2v";
    read(e, "channel", w, channel);
    spec.pipeline.channel = parse_channel(channel);

    const json* vs = find(e, "variants");
    if (!vs || !vs->is_array() || vs->empty())
        throw ConfigError(w + ".variants must be a non-empty list");
    for (const auto& v : *vs) {
        if (!v.is_string())
            throw ConfigError(w + ".variants entries must be strings");
        spec.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (const json* s = find(e, "sweep")) {
        const std::string ws = w + ".sweep";
        check_object(*s, ws, {"snr_db", "pathloss_n", "sigma_snr_db", "sigma_csi"});
        read(*s, "snr_db", ws, spec.snr_db);
        read(*s, "pathloss_n", ws, spec.pathloss_n);
        read(*s, "sigma_snr_db", ws, spec.sigma_snr_db);
        read(*s, "sigma_csi", ws, spec.sigma_csi);
    }
    read(e, "scenes", w, spec.scenes);
    read(e, "seeds", w, spec.seeds);
    if (spec.scenes < 1 || spec.seeds < 1)
        throw ConfigError(w + ": scenes and seeds must be >= 1");
    (void)spec.points();
    try {
        spec.pipeline.validate();
    } catch (const ConfigError& ex) {
        throw ConfigError(w + ": " + ex.what());
    }
    return spec;
}

} // namespace

DiffusionSchedule DiffusionSettings::schedule() const {
    return DiffusionSchedule::linear(steps, beta_min, beta_max, variance);
}

InferenceSchedule DiffusionSettings::inference() const {
    return make_inference_schedule(fast_levels, schedule());
}

std::vector<SweepPoint> ExperimentSpec::points() const {
    return make_sweep(snr_db, pathloss_n, sigma_snr_db, sigma_csi);
}

PipelineConfig ExperimentConfig::training_pipeline() const {
    PipelineConfig p = pipeline;
    p.channel = train.channel;
    return p;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_object(root, "config",
                 {"root_seed", "scene", "link", "channels", "fusion", "gate", "compress", "diffusion", "models", "train",
                  "experiments"});

    ExperimentConfig cfg;
    cfg.hash = fnv1a_hex(root.dump());
    read_seed(root, "root_seed", "", cfg.root_seed);

    json base = json::object();
    for (auto key : kPipelineKeys)
        if (const json* v = find(root, key))
            base[std::string(key)] = *v;
    cfg.pipeline = parse_pipeline(base);
    cfg.pipeline.validate();

    if (const json* d = find(root, "diffusion"))
        cfg.diffusion = parse_diffusion(*d);
    (void)cfg.diffusion.inference();
    cfg.pipeline.fast_levels = cfg.diffusion.fast_levels;

    if (const json* m = find(root, "models")) {
        check_object(*m, "models", {"denoiser", "weighting"});
        std::string d = cfg.models.denoiser.string(), w = cfg.models.weighting.string();
        read(*m, "denoiser", "models", d);
        read(*m, "weighting", "models", w);
        cfg.models.denoiser = d;
        cfg.models.weighting = w;
    }
    for (auto* p : {&cfg.models.denoiser, &cfg.models.weighting})
        if (p->is_relative() && !base_dir.empty())
            *p = base_dir / *p;

    if (const json* t = find(root, "train"))
        parse_train(*t, cfg.train);
    cfg.train.predictor.channels = cfg.pipeline.scene.shape.channels;
    cfg.train.predictor.steps = cfg.diffusion.steps;
    cfg.train.weighting_model.channels = cfg.pipeline.scene.shape.channels;

    const json* exps = find(root, "experiments");
    if (!exps || !exps->is_array() || exps->empty())
        throw ConfigError("config needs a non-empty 'experiments' list");
    for (std::size_t i = 0; i < exps->size(); ++i) {
        cfg.experiments.push_back(parse_experiment((*exps)[i], i, base));
        cfg.experiments.back().pipeline.fast_levels = cfg.diffusion.fast_levels;
        for (std::size_t j = 0; j < i; ++j)
            if (cfg.experiments[j].name == cfg.experiments.back().name)
                throw ConfigError("duplicate experiment name '" + cfg.experiments.back().name + "'");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

} // namespace coopwd
