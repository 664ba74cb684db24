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
#include "coopwd/experiment.hpp"
#include "coopwd/rng.hpp"
#include "coopwd/weighting.hpp"
#include "gradcheck.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace coopwd;

namespace {

FeatureMap random_map(Shape s, std::uint64_t seed, double std = 1.0) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, std);
    FeatureMap f(s);
    for (auto& v : f.data())
        v = n(rng);
    return f;
}

std::vector<std::vector<double>> random_vectors(std::size_t n, std::size_t d, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> v(n, std::vector<double>(d));
    for (auto& row : v)
        for (auto& x : row)
            x = g(rng);
    return v;
}

} // namespace

TEST_CASE("zero scale gives logistic of the offset", "[weighting]") {
    WeightingModel m;
    m.init(1);
    const auto a = random_map({4, 8, 8}, 2), b = random_map({4, 8, 8}, 3);
    m.set_calibration(0.0, 0.7);
    CHECK(m.weight(a, b) == Catch::Approx(1.0 / (1.0 + std::exp(-0.7))).epsilon(1e-15));
    m.set_calibration(0.0, 0.0);
    CHECK(m.weight(a, b) == 0.5);
}

TEST_CASE("weights lie strictly inside the unit interval", "[weighting]") {
    WeightingModel m;
    m.init(4);
    m.set_calibration(6.0, -2.0);
    const auto ego = random_map({4, 8, 8}, 5);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const double w = m.weight(ego, random_map({4, 8, 8}, 100 + s, 0.1 + 0.1 * static_cast<double>(s)));
        CHECK(w > 0.0);
        CHECK(w < 1.0);
    }
    CHECK(m.similarity(ego, ego) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity by hand", "[weighting]") {
    const std::vector<double> u{1.0, 0.0}, v{1.0, 1.0}, z{0.0, 0.0};
    CHECK(cosine_similarity(u, v) == Catch::Approx(1.0 / std::sqrt(2.0)));
    CHECK(cosine_similarity(u, z) == 0.0);
}

TEST_CASE("weight application", "[weighting]") {
    const auto f = random_map({2, 4, 4}, 6);
    const auto zero = apply_weight(0.0, f);
    for (double v : zero.data())
        CHECK(v == 0.0);
    CHECK(apply_weight(1.0, f) == f);
    const auto half = apply_weight(0.5, f);
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(half.data()[i] == 0.5 * f.data()[i]);
    CHECK_THROWS_AS(apply_weight(-0.01, f), ConfigError);
    CHECK_THROWS_AS(apply_weight(1.01, f), ConfigError);
    CHECK_THROWS_AS(apply_weight(NAN, f), ConfigError);
}

TEST_CASE("gate threshold is inclusive on the denoise side", "[weighting]") {
    GatePolicy g;
    CHECK(g.decide(0.59) == GateDecision::bypass);
    CHECK(g.decide(0.60) == GateDecision::denoise);
    CHECK(g.decide(0.99) == GateDecision::denoise);
    CHECK(g.bypasses == 1);
    CHECK(g.invocations == 2);
    CHECK(g.decisions() == 3);
}

TEST_CASE("contrastive loss gradients match central differences", "[weighting]") {
    Rng rng(7);
    const std::size_t n = 4, d = 6;
    auto ego = random_vectors(n, d, rng), light = random_vectors(n, d, rng), heavy = random_vectors(n, d, rng);
    std::vector<std::vector<double>> de, dl, dh;
    contrastive_loss(ego, light, heavy, 0.1, &de, &dl, &dh);

    std::vector<double> flat, analytic;
    for (auto* set : {&ego, &light, &heavy})
        for (const auto& row : *set)
            flat.insert(flat.end(), row.begin(), row.end());
    for (auto* set : {&de, &dl, &dh})
        for (const auto& row : *set)
            analytic.insert(analytic.end(), row.begin(), row.end());
    REQUIRE(analytic.size() == flat.size());

    auto loss = [&] {
        std::size_t k = 0;
        for (auto* set : {&ego, &light, &heavy})
            for (auto& row : *set)
                for (auto& x : row)
                    x = flat[k++];
        return contrastive_loss(ego, light, heavy, 0.1, nullptr, nullptr, nullptr);
    };
    const auto r = gradcheck::check(flat, analytic, loss, flat.size(), 8);
    INFO("worst " << r.worst << " rel err " << r.max_rel_err);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("embedding backward matches central differences", "[weighting]") {
    WeightingConfig cfg;
    cfg.hidden = 6;
    cfg.embed_dim = 8;
    WeightingModel m(cfg);
    m.init(9);
    const auto f = random_map({4, 6, 6}, 10);
    Rng rng(11);
    const auto coef = random_vectors(1, cfg.embed_dim, rng)[0];
    auto loss = [&] {
        const auto e = m.embed(f);
        double s = 0.0;
        for (std::size_t k = 0; k < e.size(); ++k)
            s += coef[k] * e[k];
        return s;
    };
    m.params().zero_grad();
    WeightingModel::EmbedCache c;
    (void)m.embed_cached(f, c);
    m.embed_backward(c, coef);
    const std::vector<double> analytic(m.params().grads().begin(), m.params().grads().end());
    const std::size_t conv_params = m.params().size() - 2;
    const auto r = gradcheck::check(m.params().values().first(conv_params),
                                    std::span<const double>(analytic).first(conv_params), loss, 250, 12);
    INFO("worst " << r.worst << " rel err " << r.max_rel_err);
    CHECK(r.checked == 250);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("weighting model file round trip", "[weighting]") {
    WeightingModel m;
    m.init(13);
    m.set_calibration(3.5, -1.25);
    std::stringstream ss;
    m.write(ss);
    const auto q = WeightingModel::read(ss);
    CHECK(q.scale() == 3.5);
    CHECK(q.offset() == -1.25);
    for (std::size_t i = 0; i < m.params().size(); ++i)
        CHECK(q.params().values()[i] == m.params().values()[i]);
    std::stringstream bad("CWDP");
    CHECK_THROWS_AS(WeightingModel::read(bad), IoError);
    CHECK_THROWS_AS(WeightingModel::load("/nonexistent/weighting.cwdw"), ModelMissingError);
}

TEST_CASE("bad weighting inputs raise", "[weighting]") {
    WeightingModel m;
    m.init(14);
    auto a = random_map({4, 8, 8}, 15);
    CHECK_THROWS_AS(m.weight(a, random_map({4, 8, 6}, 16)), ConfigError);
    CHECK_THROWS_AS(m.weight(random_map({3, 8, 8}, 17), random_map({3, 8, 8}, 18)), ConfigError);
    auto b = a;
    b.data()[3] = NAN;
    CHECK_THROWS_AS(m.weight(a, b), NumericalError);
}

TEST_CASE("short contrastive training separates light from heavy replicas", "[weighting]") {
    WeightingModel m;
    m.init(19);
    WeightingTrainConfig cfg;
    cfg.steps = 60;
    cfg.calibration_pool = 32;
    const auto src = make_triplet_source(PipelineConfig{});
    const auto rep = train_weighting(m, src, cfg, 20);
    CHECK(rep.loss.size() == 60);
    CHECK(rep.median_light_similarity > rep.median_heavy_similarity);
    std::size_t ordered = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto t = src(5000 + s);
        ordered += m.weight(t.ego, t.light) > m.weight(t.ego, t.heavy) ? 1 : 0;
    }
    CHECK(ordered >= 18);
}
