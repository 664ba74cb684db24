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
#include "coopwd/experiment.hpp"
#include "coopwd/harness.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace coopwd;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"({
  "root_seed": 3,
  "experiments": [
    {"name": "a", "channel": "rician", "variants": ["coop", "coop_w"],
     "sweep": {"snr_db": [0, 20]}, "scenes": 2, "seeds": 3}
  ]
})";

std::string with_experiment(const std::string& body) {
    return std::string(R"({"experiments": [)") + body + "]}";
}

ExperimentRecord sample_record(std::size_t point, Variant v) {
    ExperimentRecord r;
    r.experiment = "demo";
    r.config_hash = "0123456789abcdef";
    r.point_index = point;
    r.seed_index = 1;
    r.seed = 987654321987ULL;
    r.variant = v;
    r.channel = ChannelKind::tdl;
    r.point = {point, 10.0 * static_cast<double>(point), 0.0, 0.0, 0.1};
    r.scenes = 20;
    r.ap_loose = 0.1 + 0.2;
    r.ap_strict = 1.0 / 3.0;
    r.mse_pre = 1e-300;
    r.mse_post = 12345.678901234567;
    r.mean_w = 0.5;
    r.bypass_fraction = 0.25;
    r.denoiser_calls = 7;
    r.erased_slots = 2;
    r.times = {0.001, 0.002, 0.003, 0.004};
    return r;
}

std::string records_text(const std::vector<ExperimentRecord>& r) {
    std::ostringstream os;
    write_records_csv(os, r);
    return os.str();
}

PipelineConfig clean_link_pipeline() {
    PipelineConfig cfg;
    cfg.channel = ChannelKind::flat_rician;
    cfg.rician.k_factor = 1e12;
    cfg.link.csi_mode = CsiMode::perfect;
    cfg.scene.background_std = 0.0;
    return cfg;
}

WeightingModel fixed_weighting(double offset) {
    WeightingModel m;
    m.init(1);
    m.set_calibration(0.0, offset);
    return m;
}

} // namespace

TEST_CASE("config errors name the problem", "[harness]") {
    auto message = [](const std::string& text) {
        try {
            (void)parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK_THAT(message(with_experiment(R"({"name": "x", "variants": []})")),
               Catch::Matchers::ContainsSubstring("variants"));
    CHECK_THAT(message(R"({"experiments": [{"name": "x", "variants": ["coop"]}], "bogus": 1})"),
               Catch::Matchers::ContainsSubstring("bogus"));
    CHECK_THAT(message(with_experiment(R"({"name": "x", "variants": ["coop"], "scenes": 0})")),
               Catch::Matchers::ContainsSubstring("scenes"));
    CHECK_THAT(message(with_experiment(R"({"name": "x", "variants": ["coop"]}, {"name": "x", "variants": ["coop"]})")),
               Catch::Matchers::ContainsSubstring("duplicate"));
    CHECK_THAT(message(with_experiment(R"({"name": "x", "variants": ["coop_z"]})")),
               Catch::Matchers::ContainsSubstring("coop_z"));
    CHECK_THAT(message("{ not json"), Catch::Matchers::ContainsSubstring("JSON"));
    CHECK_THAT(message("{}"), Catch::Matchers::ContainsSubstring("experiments"));
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("config hash ignores formatting and tracks values", "[harness]") {
    const auto a = parse_config(kTiny);
    const auto b = parse_config(kTiny);
    CHECK(a.hash == b.hash);
    CHECK(a.hash.size() == 16);
    const auto reordered = parse_config(
        R"({"experiments":[{"seeds":3,"scenes":2,"sweep":{"snr_db":[0,20]},"variants":["coop","coop_w"],"channel":"rician","name":"a"}],"root_seed":3})");
    CHECK(reordered.hash == a.hash);
    std::string changed = kTiny;
    changed.replace(changed.find("\"root_seed\": 3"), 14, "\"root_seed\": 4");
    CHECK(parse_config(changed).hash != a.hash);
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("relative model paths resolve against the config directory", "[harness]") {
    const auto text = std::string(R"({"models": {"denoiser": "m/d.cwdp", "weighting": "/abs/w.cwdw"},)") +
                      R"("experiments": [{"name": "x", "variants": ["coop"]}]})";
    const auto cfg = parse_config(text, "/base/dir");
    CHECK(cfg.models.denoiser == fs::path("/base/dir/m/d.cwdp"));
    CHECK(cfg.models.weighting == fs::path("/abs/w.cwdw"));
}

TEST_CASE("records CSV round trip is exact", "[harness]") {
    const std::vector<ExperimentRecord> recs{sample_record(0, Variant::coop), sample_record(1, Variant::coop_wd_eco)};
    const auto text = records_text(recs);
    CHECK(text.rfind(std::string(kRecordsSchema) + "\n", 0) == 0);
    std::istringstream in(text);
    const auto back = read_records_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].variant == Variant::coop_wd_eco);
    CHECK(back[1].channel == ChannelKind::tdl);
    CHECK(back[1].seed == 987654321987ULL);
    CHECK(back[1].ap_loose == 0.1 + 0.2);
    CHECK(back[1].mse_pre == 1e-300);
    CHECK(back[1].mse_post == 12345.678901234567);
    CHECK(back[1].point.sigma_csi == 0.1);
    CHECK(records_text(back) == text);

    std::ostringstream rt;
    write_runtime_csv(rt, recs);
    std::istringstream rin(rt.str());
    auto merged = back;
    read_runtime_csv(rin, merged);
    CHECK(merged[0].times.denoising == 0.003);
}

TEST_CASE("records reader rejects other schemas and reports the line", "[harness]") {
    const std::vector<ExperimentRecord> recs{sample_record(0, Variant::coop)};
    std::ostringstream rt;
    write_runtime_csv(rt, recs);
    std::istringstream wrong(rt.str());
    CHECK_THROWS_AS(read_records_csv(wrong), ConfigError);

    auto text = records_text(recs);
    text += "demo,0123456789abcdef,2,0,1,coop\n";
    std::istringstream bad(text);
    CHECK_THROWS_WITH(read_records_csv(bad), Catch::Matchers::ContainsSubstring("line 4"));

    auto out_of_range = sample_record(0, Variant::coop);
    out_of_range.ap_loose = 1.5;
    std::istringstream oor(records_text({out_of_range}));
    CHECK_THROWS_AS(read_records_csv(oor), ConfigError);
}

TEST_CASE("single record gives a one-cell table", "[harness]") {
    const auto md = report_markdown({sample_record(0, Variant::coop)}, false);
    CHECK_THAT(md, Catch::Matchers::ContainsSubstring("## demo"));
    CHECK_THAT(md, Catch::Matchers::ContainsSubstring("| coop |"));
    CHECK(report_markdown({}, false).find('|') == std::string::npos);
}

TEST_CASE("noiseless link reproduces the clean fusion", "[harness]") {
    const auto cfg = clean_link_pipeline();
    SweepPoint pt;
    pt.snr_db = INFINITY;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto ts = transmit_scene(cfg, pt, 11, i);
        const auto o = evaluate_scene(Variant::coop, ts, Models{}, cfg);
        const auto clean = detect_and_score(fuse(cfg.fusion, ts.scene.ego, ts.scene.cavs), ts.scene.truth);
        CHECK(o.ap_loose == Catch::Approx(clean.ap[0]));
        CHECK(o.ap_loose == 1.0);
        CHECK(o.mse_pre < 1e-20);
        CHECK(o.times.recovery() == 0.0);
        CHECK(o.denoiser_calls == 0);
    }
}

TEST_CASE("identity recovery makes variants coincide", "[harness]") {
    PipelineConfig cfg;
    SweepPoint pt;
    pt.snr_db = 5.0;
    const auto w = fixed_weighting(1.0);
    Models m;
    m.weighting = &w;
    m.denoise_fn = [](const FeatureMap& f, std::uint64_t) { return f; };
    for (std::size_t i = 0; i < 4; ++i) {
        const auto ts = transmit_scene(cfg, pt, 21, i);
        const auto coop = evaluate_scene(Variant::coop, ts, m, cfg);
        const auto d = evaluate_scene(Variant::coop_d, ts, m, cfg);
        const auto cw = evaluate_scene(Variant::coop_w, ts, m, cfg);
        const auto wd = evaluate_scene(Variant::coop_wd, ts, m, cfg);
        CHECK(d.ap_loose == coop.ap_loose);
        CHECK(d.ap_strict == coop.ap_strict);
        CHECK(wd.ap_loose == cw.ap_loose);
        CHECK(wd.ap_strict == cw.ap_strict);
        CHECK(wd.mse_post == cw.mse_post);
        CHECK(d.denoiser_calls == cfg.num_cavs);
    }
}

TEST_CASE("eco gate skips the denoiser and its time", "[harness]") {
    PipelineConfig cfg;
    SweepPoint pt;
    pt.snr_db = 10.0;
    const auto ts = transmit_scene(cfg, pt, 31, 0);
    const auto low = fixed_weighting(-3.0), high = fixed_weighting(3.0);
    Models m;
    m.denoise_fn = [](const FeatureMap& f, std::uint64_t) { return f; };

    m.weighting = &low;
    const auto skipped = evaluate_scene(Variant::coop_wd_eco, ts, m, cfg);
    CHECK(skipped.bypasses == cfg.num_cavs);
    CHECK(skipped.denoiser_calls == 0);
    CHECK(skipped.times.denoising == 0.0);
    CHECK(skipped.times.weighting > 0.0);
    CHECK(skipped.times.recovery() == skipped.times.weighting);

    m.weighting = &high;
    const auto full = evaluate_scene(Variant::coop_wd_eco, ts, m, cfg);
    CHECK(full.bypasses == 0);
    CHECK(full.denoiser_calls == cfg.num_cavs);
    CHECK(full.times.total() ==
          Catch::Approx(full.times.link + full.times.weighting + full.times.denoising + full.times.fusion));
}

TEST_CASE("missing models name the variant", "[harness]") {
    PipelineConfig cfg;
    const auto ts = transmit_scene(cfg, SweepPoint{}, 41, 0);
    CHECK_THROWS_WITH(evaluate_scene(Variant::coop_d, ts, Models{}, cfg), Catch::Matchers::ContainsSubstring("coop_d"));
    CHECK_THROWS_WITH(evaluate_scene(Variant::coop_w, ts, Models{}, cfg), Catch::Matchers::ContainsSubstring("coop_w"));
    auto ecfg = parse_config(with_experiment(R"({"name": "x", "variants": ["coop", "coop_wd_eco"]})"), "/nonexistent");
    CHECK_THROWS_WITH(LoadedModels::load(ecfg, selected_variants(ecfg, {})),
                      Catch::Matchers::ContainsSubstring("coop_wd_eco"));
}

TEST_CASE("sweep output does not depend on the thread count", "[harness]") {
    const auto cfg = parse_config(kTiny);
    const auto w = fixed_weighting(0.5);
    Models m;
    m.weighting = &w;
    const auto one = run_sweep(cfg, m, {1, std::nullopt});
    const auto two = run_sweep(cfg, m, {2, std::nullopt});
    REQUIRE(one.size() == 2 * 2 * 3);
    CHECK(records_text(one) == records_text(two));
    CHECK(one[0].point_index == 0);
    CHECK(one[0].seed_index == 0);
    CHECK(one[0].variant == Variant::coop);
    CHECK(one[1].variant == Variant::coop_w);
    CHECK(one[2].seed_index == 1);

    const auto only = run_sweep(cfg, m, {1, Variant::coop});
    CHECK(only.size() == 6);
    CHECK(only[1].ap_loose == one[2].ap_loose);
}

TEST_CASE("unwritable output directory raises an IO error", "[harness]") {
    const auto cfg = parse_config(with_experiment(R"({"name": "x", "variants": ["coop"], "scenes": 1})"));
    const auto blocker = fs::temp_directory_path() / "coopwd_blocker_file";
    { std::ofstream(blocker) << "x"; }
    CHECK_THROWS_AS(run_and_write(cfg, Models{}, {}, blocker / "out"), IoError);
    fs::remove(blocker);
}
