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
#include "coopwd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace coopwd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSpeedOfLight = 299792458.0;

std::size_t delay_to_lag(double delay_s, double symbol_period_s) {
    return static_cast<std::size_t>(std::llround(delay_s / symbol_period_s));
}
} // namespace

const char* to_string(ChannelKind k) noexcept {
    switch (k) {
    case ChannelKind::flat_rician: return "rician";
    case ChannelKind::cir_taps: return "v2v";
    case ChannelKind::tdl: return "tdl";
    }
    return "?";
}

double ChannelRealization::mean_power(std::size_t slot) const {
    double p = 0.0;
    for (const auto& t : slots.at(slot))
        p += t.mean_power;
    return p;
}

std::size_t ChannelRealization::max_lag() const noexcept {
    std::size_t m = 0;
    for (const auto& s : slots)
        for (const auto& t : s)
            m = std::max(m, t.lag);
    return m;
}

void ChannelRealization::validate() const {
    for (const auto& s : slots) {
        if (s.empty())
            throw NumericalError("channel slot without taps");
        for (const auto& t : s)
            if (!std::isfinite(t.gain.real()) || !std::isfinite(t.gain.imag()))
                throw NumericalError("non-finite channel gain");
    }
}

ChannelRealization identity_channel(std::size_t num_slots) {
    ChannelRealization ch;
    ch.kind = ChannelKind::flat_rician;
    ch.slots.assign(num_slots, std::vector<Tap>{Tap{}});
    return ch;
}

// --- Rician ---------------------------------------------------------------

double RicianConfig::path_gain() const noexcept { return p0 / std::pow(distance_m, pathloss_n); }

void RicianConfig::validate() const {
    if (!(p0 > 0.0))
        throw ConfigError("rician p0 must be > 0");
    if (!(distance_m > 0.0))
        throw ConfigError("rician distance must be > 0");
    if (!(pathloss_n >= 0.0))
        throw ConfigError("rician path-loss exponent must be >= 0");
    if (!(k_factor >= 0.0))
        throw ConfigError("rician K must be >= 0");
    if (!(k_walk_std >= 0.0))
        throw ConfigError("rician K random-walk std must be >= 0");
}

ChannelRealization sample_rician(const RicianConfig& cfg, std::size_t num_slots, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Rng walk_rng(derive_seed(seed, 1));
    std::normal_distribution<double> walk(0.0, cfg.k_walk_std > 0.0 ? cfg.k_walk_std : 1.0);

    const double pl = cfg.path_gain();
    const double amp = std::sqrt(pl);
    const cplx los_dir = std::polar(1.0, cfg.los_phase);

    ChannelRealization ch;
    ch.kind = ChannelKind::flat_rician;
    ch.slots.reserve(num_slots);
    double k = cfg.k_factor;
    for (std::size_t s = 0; s < num_slots; ++s) {
        const double mu = std::sqrt(k / (k + 1.0));
        const double scatter = 1.0 / (k + 1.0);
        const cplx h = mu * los_dir + complex_normal(rng, scatter);
        ch.slots.push_back({Tap{0.0, 0, amp * h, pl}});
        if (cfg.k_walk_std > 0.0)
            k = std::abs(k + walk(walk_rng));
    }
    return ch;
}

// --- Non-stationary V2V ---------------------------------------------------

double MotionProfile::speed(double t) const noexcept { return std::max(0.0, v0 + accel * t); }

double MotionProfile::heading(double t) const noexcept {
    double h = 0.0;
    for (const auto& [start, value] : heading_segments)
        if (t >= start)
            h = value;
    return h;
}

void V2VChannelConfig::validate() const {
    if (num_paths < 1)
        throw ConfigError("v2v channel needs at least one path");
    if (rays_per_path < 1)
        throw ConfigError("v2v channel needs at least one ray per path");
    if (!(wavelength_m > 0.0))
        throw ConfigError("v2v wavelength must be > 0");
    if (!(slot_duration_s > 0.0) || !(symbol_period_s > 0.0))
        throw ConfigError("v2v slot duration and symbol period must be > 0");
    if (!(delay_spread_s >= 0.0) || !(power_decay_per_s >= 0.0))
        throw ConfigError("v2v delay spread and power decay must be >= 0");
    if (!(aod_spread_rad >= 0.0) || !(aoa_spread_rad >= 0.0))
        throw ConfigError("v2v angle spreads must be >= 0");
    if (!aod_mean_rad.empty() && aod_mean_rad.size() != num_paths)
        throw ConfigError("aod_mean_rad must have num_paths entries");
    if (!aoa_mean_rad.empty() && aoa_mean_rad.size() != num_paths)
        throw ConfigError("aoa_mean_rad must have num_paths entries");
}

ChannelRealization sample_v2v_cir(const V2VChannelConfig& cfg, std::size_t num_slots, std::uint64_t seed,
                                  V2VTrace* trace) {
    cfg.validate();
    const std::size_t N = cfg.num_paths;
    const std::size_t M = cfg.rays_per_path;
    Rng rng(seed);
    std::uniform_real_distribution<double> uphase(0.0, kTwoPi);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    // Path geometry: mean angles, initial delays.
    std::vector<double> aod_mean(N), aoa_mean(N), tau0(N);
    for (std::size_t n = 0; n < N; ++n) {
        const bool los = cfg.los_first_path && n == 0;
        // The heading at t = 0 anchors the LoS path.
        aod_mean[n] = los ? cfg.tx.heading(0.0) : kTwoPi - uphase(rng);
        aoa_mean[n] = los ? cfg.rx.heading(0.0) : kTwoPi - uphase(rng);
        // Exponential excess delays truncated at three delay spreads.
        tau0[n] = los ? 0.0 : std::min(cfg.delay_spread_s * expo(rng), 3.0 * cfg.delay_spread_s);
    }
    if (!cfg.aod_mean_rad.empty())
        aod_mean = cfg.aod_mean_rad;
    if (!cfg.aoa_mean_rad.empty())
        aoa_mean = cfg.aoa_mean_rad;

    // Ray angles and initial phases theta ~ U(0, 2pi].
    std::vector<double> aod(N * M), aoa(N * M), theta(N * M);
    for (std::size_t i = 0; i < N * M; ++i) {
        const std::size_t n = i / M;
        aod[i] = aod_mean[n] + cfg.aod_spread_rad * unit(rng);
        aoa[i] = aoa_mean[n] + cfg.aoa_spread_rad * unit(rng);
        theta[i] = kTwoPi - uphase(rng);
    }

    const double dt = cfg.slot_duration_s;
    auto doppler = [&](std::size_t i, double t) {
        const double ft = cfg.tx.speed(t) / cfg.wavelength_m * std::cos(aod[i] - cfg.tx.heading(t));
        const double fr = cfg.rx.speed(t) / cfg.wavelength_m * std::cos(aoa[i] - cfg.rx.heading(t));
        return ft + fr;
    };

    std::vector<double> phase(N * M, 0.0);    // 2pi * integral f dt
    std::vector<double> path_len_phase(N, 0.0); // integral of the path's mean Doppler
    std::vector<double> f_prev(N * M);
    for (std::size_t i = 0; i < N * M; ++i)
        f_prev[i] = doppler(i, 0.0);

    ChannelRealization ch;
    ch.kind = ChannelKind::cir_taps;
    ch.slots.reserve(num_slots);
    if (trace) {
        *trace = {};
        trace->path_gain.reserve(num_slots);
    }

    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(M));
    for (std::size_t s = 0; s < num_slots; ++s) {
        const double t = static_cast<double>(s) * dt;
        if (s > 0) {
            // Trapezoidal accumulation of the Doppler integral over one slot.
            for (std::size_t i = 0; i < N * M; ++i) {
                const double f_now = doppler(i, t);
                const double inc = 0.5 * (f_prev[i] + f_now) * dt;
                phase[i] += kTwoPi * inc;
                path_len_phase[i / M] += inc / static_cast<double>(M);
                f_prev[i] = f_now;
            }
        }

        std::vector<cplx> h_path(N);
        std::vector<double> tau(N), power(N);
        double psum = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            cplx acc{0.0, 0.0};
            for (std::size_t m = 0; m < M; ++m) {
                const std::size_t i = n * M + m;
                acc += std::polar(1.0, phase[i] + theta[i]);
            }
            h_path[n] = acc * inv_sqrt_m;
            tau[n] = std::max(0.0, tau0[n] - cfg.wavelength_m / kSpeedOfLight * path_len_phase[n]);
            power[n] = std::exp(-cfg.power_decay_per_s * tau[n]);
            psum += power[n];
        }
        for (double& p : power)
            p /= psum;

        // Paths that land on the same symbol lag are merged into one tap.
        std::vector<Tap> taps;
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t lag = delay_to_lag(tau[n], cfg.symbol_period_s);
            const cplx g = std::sqrt(cfg.path_gain * power[n]) * h_path[n];
            auto it = std::find_if(taps.begin(), taps.end(), [&](const Tap& x) { return x.lag == lag; });
            if (it == taps.end()) {
                taps.push_back(Tap{tau[n], lag, g, cfg.path_gain * power[n]});
            } else {
                it->gain += g;
                it->mean_power += cfg.path_gain * power[n];
            }
        }
        std::sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) { return a.lag < b.lag; });
        ch.slots.push_back(std::move(taps));

        if (trace) {
            trace->path_gain.push_back(h_path);
            trace->path_power.push_back(power);
            trace->path_delay_s.push_back(tau);
            trace->ray_phase.push_back(phase);
        }
    }
    return ch;
}

// --- Tapped delay line ----------------------------------------------------

void TdlProfile::validate() const {
    if (taps.empty())
        throw ConfigError("tdl profile has no taps");
    if (!(symbol_period_s > 0.0))
        throw ConfigError("tdl symbol period must be > 0");
    double sum = 0.0;
    for (const auto& t : taps) {
        if (!(t.power >= 0.0) || !(t.delay_s >= 0.0))
            throw ConfigError("tdl taps need non-negative delay and power");
        sum += t.power;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("tdl powers must sum to 1, got " + std::to_string(sum));
}

ChannelRealization sample_tdl(const TdlProfile& profile, std::uint64_t seed, std::size_t num_slots) {
    profile.validate();
    Rng rng(seed);
    ChannelRealization ch;
    ch.kind = ChannelKind::tdl;
    ch.slots.reserve(num_slots);
    for (std::size_t s = 0; s < num_slots; ++s) {
        std::vector<Tap> taps;
        for (const auto& e : profile.taps) {
            const double p = profile.path_gain * e.power;
            const std::size_t lag = delay_to_lag(e.delay_s, profile.symbol_period_s);
            const cplx g = complex_normal(rng, p);
            auto it = std::find_if(taps.begin(), taps.end(), [&](const Tap& x) { return x.lag == lag; });
            if (it == taps.end()) {
                taps.push_back(Tap{e.delay_s, lag, g, p});
            } else {
                it->gain += g;
                it->mean_power += p;
            }
        }
        std::sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) { return a.lag < b.lag; });
        ch.slots.push_back(std::move(taps));
    }
    return ch;
}

// --- Disturbances ---------------------------------------------------------

void DisturbanceProcess::validate() const {
    if (!(sigma_snr_db >= 0.0) || !(sigma_csi >= 0.0))
        throw ConfigError("disturbance sigmas must be >= 0");
}

DisturbanceSamples sample_disturbance(const DisturbanceProcess& proc, std::size_t num_slots,
                                      std::uint64_t seed) {
    proc.validate();
    DisturbanceSamples out;
    out.snr_offset_db.assign(num_slots, 0.0);
    out.csi_error_std.assign(num_slots, 0.0);
    Rng snr_rng(derive_seed(seed, 0));
    Rng csi_rng(derive_seed(seed, 1));
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t s = 0; s < num_slots; ++s) {
        const double a = n(snr_rng);
        const double b = n(csi_rng);
        out.snr_offset_db[s] = proc.sigma_snr_db * a;
        out.csi_error_std[s] = std::abs(proc.sigma_csi * b);
    }
    return out;
}

void write_realization_csv(std::ostream& out, const ChannelRealization& ch) {
    out << "slot,tap_index,delay,re,im\n";
    out.precision(17);
    for (std::size_t s = 0; s < ch.slots.size(); ++s)
        for (std::size_t i = 0; i < ch.slots[s].size(); ++i) {
            const auto& t = ch.slots[s][i];
            out << s << ',' << i << ',' << t.delay_s << ',' << t.gain.real() << ',' << t.gain.imag() << '\n';
        }
}

} // namespace coopwd
