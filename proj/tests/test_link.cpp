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
#include "coopwd/channel.hpp"
#include "coopwd/error.hpp"
#include "coopwd/link.hpp"
#include "coopwd/rng.hpp"
#include "coopwd/symbols.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace coopwd;

namespace {

// A frame of `slots` slots of `slot_len` random unit-power symbols.
SymbolFrame random_frame(std::size_t slots, std::size_t slot_len, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureMap f({1, 1, slots * slot_len * 2});
    for (auto& v : f.data())
        v = n(rng);
    return to_symbols(f, slot_len);
}

double mean_est_err(const TransmitResult& r) {
    const auto& e = r.report.est_err_power;
    return std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

} // namespace

TEST_CASE("noise-free link applies the channel gain exactly", "[link]") {
    RicianConfig rc;
    const auto frame = random_frame(10, 16, 1);
    const auto ch = sample_rician(rc, 10, 2);
    LinkConfig cfg;
    cfg.snr_db = INFINITY;
    const auto r = transmit(frame, ch, cfg, 3);
    for (std::size_t s = 0; s < 10; ++s)
        for (std::size_t i = frame.slots[s].begin; i < frame.slots[s].end; ++i)
            CHECK(r.received.symbols[i] == ch.slots[s][0].gain * frame.symbols[i]);
}

TEST_CASE("AWGN power matches the configured SNR", "[link]") {
    const auto frame = random_frame(1000, 100, 4);
    LinkConfig cfg;
    cfg.snr_db = 10.0;
    cfg.csi_mode = CsiMode::perfect;
    const auto r = transmit(frame, identity_channel(1000), cfg, 5);
    double err = 0.0;
    for (std::size_t i = 0; i < frame.symbols.size(); ++i)
        err += std::norm(r.received.symbols[i] - frame.symbols[i]);
    CHECK(err / static_cast<double>(frame.symbols.size()) == Catch::Approx(0.1).epsilon(0.05));
}

TEST_CASE("free-space loss scales received power", "[link]") {
    RicianConfig rc;
    rc.p0 = 1.0;
    rc.distance_m = 100.0;
    rc.pathloss_n = 2.0;
    const auto frame = random_frame(100000, 2, 6);
    const auto ch = sample_rician(rc, 100000, 7);
    LinkConfig cfg;
    cfg.snr_db = INFINITY;
    const auto r = transmit(frame, ch, cfg, 8);
    double p = 0.0;
    for (auto z : r.received.symbols)
        p += std::norm(z);
    CHECK(p / static_cast<double>(r.received.symbols.size()) == Catch::Approx(1e-4).epsilon(0.03));
}

TEST_CASE("LS estimate is exact without noise", "[link]") {
    const auto pilots = pilot_sequence(1);
    const cplx h(0.3, -1.7);
    const std::vector<cplx> rx{h * pilots[0]};
    const auto est = estimate_ls(rx, pilots);
    CHECK(std::abs(est[0] - h) < 1e-12);
    const std::vector<cplx> zeros(4, cplx{0.0, 0.0});
    CHECK_THROWS_AS(estimate_ls(zeros, zeros), ConfigError);
}

TEST_CASE("LS error power scales with pilots and SNR", "[link]") {
    const std::size_t slots = 40000;
    const auto frame = random_frame(slots, 2, 9);
    const auto ch = identity_channel(slots);
    auto run = [&](std::size_t pilots, double snr_db) {
        LinkConfig cfg;
        cfg.snr_db = snr_db;
        cfg.pilots_per_slot = pilots;
        return mean_est_err(transmit(frame, ch, cfg, 10 + pilots + static_cast<std::uint64_t>(snr_db)));
    };
    const double s2 = 0.1;
    const double e4 = run(4, 10.0), e8 = run(8, 10.0), e4_20 = run(4, 20.0);
    CHECK(e4 / (s2 / 4.0) == Catch::Approx(1.0).epsilon(0.10));
    CHECK(e4 / e8 == Catch::Approx(2.0).epsilon(0.10));
    CHECK(e4 / e4_20 == Catch::Approx(10.0).epsilon(0.10));
}

TEST_CASE("extra CSI error adds the configured power", "[link]") {
    const std::size_t slots = 40000;
    const auto frame = random_frame(slots, 2, 11);
    LinkConfig cfg;
    cfg.snr_db = INFINITY;
    cfg.csi_mode = CsiMode::perfect;
    cfg.extra_csi_error_std = 0.3;
    const auto r = transmit(frame, identity_channel(slots), cfg, 12);
    CHECK(mean_est_err(r) == Catch::Approx(0.09).epsilon(0.05));
}

TEST_CASE("zero forcing is exact with perfect CSI", "[link]") {
    RicianConfig rc;
    rc.k_factor = 1.0;
    const auto frame = random_frame(50, 16, 13);
    LinkConfig cfg;
    cfg.snr_db = INFINITY;
    cfg.csi_mode = CsiMode::perfect;
    const auto out = run_link(frame, sample_rician(rc, 50, 14), cfg, 15);
    for (std::size_t i = 0; i < frame.symbols.size(); ++i)
        CHECK(std::abs(out.equalized.symbols[i] - frame.symbols[i]) < 1e-10);
    CHECK(out.report.erased_count() == 0);
}

TEST_CASE("biased estimate scales the recovered tensor", "[link]") {
    RicianConfig rc;
    FeatureMap f({2, 4, 4});
    for (std::size_t i = 0; i < f.size(); ++i)
        f.data()[i] = std::sin(1.3 * static_cast<double>(i));
    const auto frame = to_symbols(f, 8);
    const auto ch = sample_rician(rc, frame.num_slots(), 16);
    LinkConfig cfg;
    cfg.snr_db = INFINITY;
    cfg.csi_mode = CsiMode::perfect;
    auto tx = transmit(frame, ch, cfg, 17);
    for (auto& e : tx.estimate)
        for (auto& h : e)
            h *= 1.1;
    const auto eq = zero_forcing(tx.received, tx.estimate, tx.zf_epsilon);
    const auto g = from_symbols(eq.frame, f.shape());
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(g.data()[i] - f.data()[i] / 1.1) < 1e-9);
}

TEST_CASE("deep fades are erased and counted", "[link]") {
    const auto frame = random_frame(4, 8, 18);
    SymbolFrame rx = frame;
    const std::vector<std::vector<cplx>> est{{1.0}, {1e-6}, {cplx(0.0, 2.0)}, {0.0}};
    const std::vector<double> eps(4, 1e-3);
    const auto eq = zero_forcing(rx, est, eps);
    CHECK(eq.erased == std::vector<bool>{false, true, false, true});
    for (std::size_t i = frame.slots[1].begin; i < frame.slots[1].end; ++i)
        CHECK(eq.frame.symbols[i] == cplx(0.0, 0.0));

    LinkReport rep;
    rep.erased = eq.erased;
    CHECK(rep.erased_count() == 2);
}

TEST_CASE("post-ZF noise equals noise power times mean inverse channel power", "[link]") {
    const std::size_t slots = 20000;
    RicianConfig rc;
    rc.k_factor = 4.0;
    const auto frame = random_frame(slots, 16, 19);
    const auto ch = sample_rician(rc, slots, 20);
    LinkConfig cfg;
    cfg.snr_db = 10.0;
    cfg.csi_mode = CsiMode::perfect;
    const auto out = run_link(frame, ch, cfg, 21);
    const double s2 = 0.1; // receiver-referenced SNR with E|h|^2 = 1
    double measured = 0.0, predicted = 0.0;
    std::size_t kept = 0;
    for (std::size_t s = 0; s < slots; ++s) {
        if (out.report.erased[s])
            continue;
        ++kept;
        predicted += s2 / std::norm(ch.slots[s][0].gain);
        double e = 0.0;
        for (std::size_t i = frame.slots[s].begin; i < frame.slots[s].end; ++i)
            e += std::norm(out.equalized.symbols[i] - frame.symbols[i]);
        measured += e / static_cast<double>(frame.slots[s].size());
    }
    CHECK(measured / predicted == Catch::Approx(1.0).epsilon(0.10));
    CHECK(kept + out.report.erased_count() == slots);
}

TEST_CASE("post-ZF feature MSE falls as SNR rises", "[link]") {
    RicianConfig rc;
    rc.k_factor = 0.0;
    std::vector<double> curve;
    for (double snr : {0.0, 5.0, 10.0, 15.0, 20.0}) {
        double sum = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            FeatureMap f({4, 16, 16});
            Rng rng(seed);
            std::normal_distribution<double> n(0.0, 1.0);
            for (auto& v : f.data())
                v = n(rng);
            const auto frame = to_symbols(f, 64);
            LinkConfig cfg;
            cfg.snr_db = snr;
            const auto out = run_link(frame, sample_rician(rc, frame.num_slots(), 100 + seed), cfg, 200 + seed);
            sum += mse(from_symbols(out.equalized, f.shape()), f);
        }
        curve.push_back(sum / 10.0);
    }
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i] < curve[i - 1]);
}

TEST_CASE("TDL link with known taps is exact", "[link]") {
    TdlProfile p;
    const auto frame = random_frame(30, 32, 22);
    LinkConfig cfg;
    cfg.snr_db = INFINITY;
    cfg.csi_mode = CsiMode::perfect;
    const auto out = run_link(frame, sample_tdl(p, 23, 30), cfg, 24);
    for (std::size_t i = 0; i < frame.symbols.size(); ++i)
        CHECK(std::abs(out.equalized.symbols[i] - frame.symbols[i]) < 1e-10);
}

TEST_CASE("slot count mismatch is a configuration error", "[link]") {
    const auto frame = random_frame(5, 8, 25);
    LinkConfig cfg;
    CHECK_THROWS_AS(transmit(frame, identity_channel(4), cfg, 1), ConfigError);
    cfg.pilots_per_slot = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("link report CSV", "[link]") {
    const auto frame = random_frame(3, 8, 26);
    LinkConfig cfg;
    cfg.snr_db = 15.0;
    const auto out = run_link(frame, identity_channel(3), cfg, 27);
    std::ostringstream os;
    out.report.write_csv(os);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "slot,snr_db_effective,est_err_power,erased");
    std::size_t rows = 0;
    while (std::getline(in, line))
        ++rows;
    CHECK(rows == 3);
    for (double v : out.report.est_err_power)
        CHECK(v >= 0.0);
}
