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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace coopwd {

using cplx = std::complex<double>;

enum class ChannelKind { flat_rician, cir_taps, tdl };

[[nodiscard]] const char* to_string(ChannelKind k) noexcept;

struct Tap {
    double delay_s = 0.0;
    std::size_t lag = 0; ///< delay quantised to whole symbol periods
    cplx gain{1.0, 0.0};
    double mean_power = 1.0; ///< expected |gain|^2 of this tap, path loss included
};

/// Per-slot channel state. Gains include path loss where the model has one.
struct ChannelRealization {
    ChannelKind kind = ChannelKind::flat_rician;
    std::vector<std::vector<Tap>> slots;
    std::vector<double> effective_snr_db; ///< filled by the link layer

    [[nodiscard]] std::size_t num_slots() const noexcept { return slots.size(); }
    /// Expected total channel power of slot k (sum of tap mean powers).
    [[nodiscard]] double mean_power(std::size_t slot) const;
    [[nodiscard]] std::size_t max_lag() const noexcept;
    /// Throws NumericalError on an empty slot or a non-finite gain.
    void validate() const;
};

/// One slot, one tap, unit gain.
[[nodiscard]] ChannelRealization identity_channel(std::size_t num_slots);

/// Flat Rician fading with path loss p0 / d^n.
struct RicianConfig {
    double p0 = 1.0;
    double distance_m = 1.0;
    double pathloss_n = 0.0;
    double k_factor = 4.0;
    double k_walk_std = 0.0; ///< per-slot std of the reflected random walk on K
    double snr_db = 20.0;    ///< carried for configuration files; the link layer owns noise
    double los_phase = 0.0;

    [[nodiscard]] double path_gain() const noexcept; ///< p0 / d^n (power)
    void validate() const;
};

/// h_k = sqrt(p0/d^n) * (mu + s * CN(0,1)) with mu^2 = K/(K+1), s^2 = 1/(K+1).
/// With k_walk_std > 0, K_{k+1} = |K_k + N(0, k_walk_std^2)|.
[[nodiscard]] ChannelRealization sample_rician(const RicianConfig& cfg, std::size_t num_slots,
                                               std::uint64_t seed);

struct MotionProfile {
    double v0 = 0.0;    ///< m/s at t = 0
    double accel = 0.0; ///< m/s^2; speed is clamped at 0
    /// Piecewise-constant heading: heading_segments[i] = {start time s, heading rad}.
    /// Empty means heading 0 throughout.
    std::vector<std::pair<double, double>> heading_segments;

    [[nodiscard]] double speed(double t) const noexcept;
    [[nodiscard]] double heading(double t) const noexcept;
};

/// Sum-of-sinusoids non-stationary V2V channel.
///
/// The cluster geometry is a reduced stand-in: per-path mean AoD/AoA uniform
/// in (0, 2pi], per-ray angles wrapped-Gaussian around the mean, exponential
/// initial delays, and normalised powers P_n(t) proportional to
/// exp(-power_decay * tau_n(t)). Path delays drift with the path's mean
/// Doppler, tau_n(t) = tau_n(0) - (lambda / c) * integral f_n dt.
struct V2VChannelConfig {
    std::size_t num_paths = 6;
    std::size_t rays_per_path = 20;
    double wavelength_m = 0.0508;
    MotionProfile tx{15.0, 0.0, {}};
    MotionProfile rx{15.0, 0.0, {}};
    double aod_spread_rad = 0.3;
    double aoa_spread_rad = 0.3;
    double power_decay_per_s = 1.0e7;
    double delay_spread_s = 1.0e-7;
    double slot_duration_s = 1.0e-3;
    double symbol_period_s = 1.0e-7;
    double path_gain = 1.0; ///< optional large-scale power factor
    /// Path 0 is LoS-like: zero initial delay, AoD along the Tx heading and AoA
    /// along the Rx heading (plus spreads).
    bool los_first_path = true;
    /// Optional explicit per-path mean angles; override the random draws.
    std::vector<double> aod_mean_rad;
    std::vector<double> aoa_mean_rad;

    void validate() const;
};

/// Per-slot quantities kept for analysis and tests.
struct V2VTrace {
    std::vector<std::vector<cplx>> path_gain;        ///< [slot][path] h~_n(t)
    std::vector<std::vector<double>> path_power;     ///< [slot][path] P_n(t)
    std::vector<std::vector<double>> path_delay_s;   ///< [slot][path] tau_n(t)
    std::vector<std::vector<double>> ray_phase;      ///< [slot][path * M + ray] accumulated Doppler phase
};

[[nodiscard]] ChannelRealization sample_v2v_cir(const V2VChannelConfig& cfg, std::size_t num_slots,
                                                std::uint64_t seed, V2VTrace* trace = nullptr);

struct PdpEntry {
    double delay_s = 0.0;
    double power = 1.0;
};

/// Generic tapped delay line; taps i.i.d. CN(0, power) per slot.
struct TdlProfile {
    std::vector<PdpEntry> taps{{0.0, 0.5}, {1.0e-7, 0.3}, {2.0e-7, 0.2}};
    double symbol_period_s = 1.0e-7;
    double path_gain = 1.0;

    void validate() const;
};

[[nodiscard]] ChannelRealization sample_tdl(const TdlProfile& profile, std::uint64_t seed,
                                            std::size_t num_slots);

/// Per-slot time-varying impairments.
struct DisturbanceProcess {
    double sigma_snr_db = 0.0;
    double sigma_csi = 0.0;
    void validate() const;
};

struct DisturbanceSamples {
    std::vector<double> snr_offset_db;
    /// |N(0, sigma_csi^2)|: the relative std of the extra CSI error per slot.
    std::vector<double> csi_error_std;
};

[[nodiscard]] DisturbanceSamples sample_disturbance(const DisturbanceProcess& proc, std::size_t num_slots,
                                                    std::uint64_t seed);

/// CSV rows: slot,tap_index,delay,re,im
void write_realization_csv(std::ostream& out, const ChannelRealization& ch);

} // namespace coopwd
