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
#include "coopwd/link.hpp"

#include "coopwd/error.hpp"
#include "coopwd/rng.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace coopwd {

void LinkConfig::validate() const {
    if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0.0))
        throw ConfigError("link snr_db must be a number or +inf");
    if (csi_mode == CsiMode::ls_estimate && pilots_per_slot < 1)
        throw ConfigError("LS channel estimation needs at least one pilot per slot");
    if (!(extra_csi_error_std >= 0.0))
        throw ConfigError("extra_csi_error_std must be >= 0");
    if (!(zf_epsilon_rel >= 0.0))
        throw ConfigError("zf_epsilon_rel must be >= 0");
}

std::size_t LinkReport::erased_count() const noexcept {
    std::size_t n = 0;
    for (bool e : erased)
        n += e ? 1 : 0;
    return n;
}

void LinkReport::write_csv(std::ostream& out) const {
    out << "slot,snr_db_effective,est_err_power,erased\n";
    out.precision(17);
    for (std::size_t s = 0; s < snr_db_effective.size(); ++s)
        out << s << ',' << snr_db_effective[s] << ',' << est_err_power[s] << ',' << (erased[s] ? 1 : 0) << '\n';
}

std::vector<cplx> pilot_sequence(std::size_t n) {
    // Fixed LCG bit source so the pilots never depend on the RNG library.
    std::vector<cplx> out(n);
    std::uint32_t state = 0x2545F491u;
    const double a = 1.0 / std::sqrt(2.0);
    for (auto& p : out) {
        state = state * 1664525u + 1013904223u;
        const bool bi = (state >> 31) & 1u;
        const bool bq = (state >> 30) & 1u;
        p = {bi ? a : -a, bq ? a : -a};
    }
    return out;
}

std::vector<cplx> circular_convolve(std::span<const cplx> block, std::span<const cplx> taps) {
    const std::size_t n = block.size();
    std::vector<cplx> out(n, cplx{0.0, 0.0});
    for (std::size_t l = 0; l < taps.size(); ++l) {
        if (taps[l] == cplx{0.0, 0.0})
            continue;
        for (std::size_t i = 0; i < n; ++i)
            out[i] += taps[l] * block[(i + n * (l / n + 1) - l) % n];
    }
    return out;
}

std::vector<cplx> tap_vector(const std::vector<Tap>& slot, std::size_t num_taps) {
    std::vector<cplx> h(num_taps, cplx{0.0, 0.0});
    for (const auto& t : slot) {
        if (t.lag >= num_taps)
            throw ConfigError("tap lag " + std::to_string(t.lag) + " exceeds tap vector length");
        h[t.lag] += t.gain;
    }
    return h;
}

std::vector<cplx> estimate_ls(std::span<const cplx> rx, std::span<const cplx> known, std::size_t num_taps) {
    if (rx.size() != known.size() || known.empty())
        throw ConfigError("pilot block size mismatch or empty pilot block");
    if (num_taps < 1 || num_taps > known.size())
        throw ConfigError("LS estimation needs at least as many pilots (" + std::to_string(known.size()) +
                          ") as taps (" + std::to_string(num_taps) + ")");
    double energy = 0.0;
    for (const auto& p : known)
        energy += std::norm(p);
    if (!(energy > 0.0))
        throw ConfigError("zero-power pilots");

    if (num_taps == 1) {
        cplx acc{0.0, 0.0};
        for (std::size_t i = 0; i < rx.size(); ++i)
            acc += rx[i] * std::conj(known[i]);
        return {acc / energy};
    }

    const auto P = static_cast<Eigen::Index>(known.size());
    const auto L = static_cast<Eigen::Index>(num_taps);
    Eigen::MatrixXcd X(P, L);
    for (Eigen::Index i = 0; i < P; ++i)
        for (Eigen::Index l = 0; l < L; ++l)
            X(i, l) = known[static_cast<std::size_t>((i - l + P) % P)];
    Eigen::VectorXcd y(P);
    for (Eigen::Index i = 0; i < P; ++i)
        y(i) = rx[static_cast<std::size_t>(i)];
    const Eigen::MatrixXcd G = X.adjoint() * X;
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(G);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().real().minCoeff() <= 1e-12 * energy)
        throw ConfigError("pilot block is rank-deficient for the requested tap count");
    const Eigen::VectorXcd h = ldlt.solve(X.adjoint() * y);
    return {h.data(), h.data() + h.size()};
}

TransmitResult transmit(const SymbolFrame& frame, const ChannelRealization& ch, const LinkConfig& cfg,
                        std::uint64_t seed) {
    cfg.validate();
    ch.validate();
    const std::size_t n_slots = frame.num_slots();
    if (ch.num_slots() != n_slots)
        throw ConfigError("frame has " + std::to_string(n_slots) + " slots, channel has " +
                          std::to_string(ch.num_slots()));
    if (!cfg.slot_snr_offset_db.empty() && cfg.slot_snr_offset_db.size() != n_slots)
        throw ConfigError("per-slot SNR offsets do not match the slot count");
    if (!cfg.slot_csi_error_std.empty() && cfg.slot_csi_error_std.size() != n_slots)
        throw ConfigError("per-slot CSI error stds do not match the slot count");

    const std::size_t n_taps = ch.max_lag() + 1;
    const std::size_t P = cfg.pilots_per_slot;
    if (cfg.csi_mode == CsiMode::ls_estimate && P < n_taps)
        throw ConfigError("channel has " + std::to_string(n_taps) + " taps but only " + std::to_string(P) +
                          " pilots per slot");
    const auto pilots = pilot_sequence(P);

    Rng noise_rng(derive_seed(seed, 0));
    Rng csi_rng(derive_seed(seed, 1));

    TransmitResult out;
    out.received = frame;
    out.rx_pilots.resize(n_slots);
    out.estimate.resize(n_slots);
    out.true_taps.resize(n_slots);
    out.zf_epsilon.resize(n_slots);
    auto& rep = out.report;
    rep.snr_db_effective.resize(n_slots);
    rep.est_err_power.resize(n_slots);
    rep.erased.assign(n_slots, false);

    for (std::size_t k = 0; k < n_slots; ++k) {
        const double mean_pow = ch.mean_power(k);
        const double offset = cfg.slot_snr_offset_db.empty() ? 0.0 : cfg.slot_snr_offset_db[k];
        const double snr_db = cfg.snr_db + offset;
        double noise_var = 0.0;
        if (!(std::isinf(snr_db) && snr_db > 0.0)) {
            const double snr_lin = std::pow(10.0, snr_db / 10.0);
            noise_var = (cfg.snr_reference == SnrReference::receiver ? mean_pow : 1.0) / snr_lin;
        }
        rep.snr_db_effective[k] = cfg.snr_reference == SnrReference::receiver
                                      ? snr_db
                                      : snr_db + 10.0 * std::log10(mean_pow);

        const auto h = tap_vector(ch.slots[k], n_taps);
        out.true_taps[k] = h;
        out.zf_epsilon[k] = cfg.zf_epsilon_rel * std::sqrt(mean_pow);

        const auto range = frame.slots[k];
        std::span<const cplx> data(frame.symbols.data() + range.begin, range.size());
        auto y = circular_convolve(data, h);
        if (noise_var > 0.0)
            for (auto& v : y)
                v += complex_normal(noise_rng, noise_var);
        std::copy(y.begin(), y.end(), out.received.symbols.begin() + static_cast<std::ptrdiff_t>(range.begin));

        if (P > 0) {
            auto yp = circular_convolve(pilots, h);
            if (noise_var > 0.0)
                for (auto& v : yp)
                    v += complex_normal(noise_rng, noise_var);
            out.rx_pilots[k] = std::move(yp);
        }

        std::vector<cplx> est = cfg.csi_mode == CsiMode::perfect ? h : estimate_ls(out.rx_pilots[k], pilots, n_taps);

        const double csi_std = cfg.slot_csi_error_std.empty() ? cfg.extra_csi_error_std : cfg.slot_csi_error_std[k];
        if (csi_std > 0.0) {
            std::vector<double> tap_pow(n_taps, 0.0);
            for (const auto& t : ch.slots[k])
                tap_pow[t.lag] += t.mean_power;
            for (std::size_t l = 0; l < n_taps; ++l)
                if (tap_pow[l] > 0.0)
                    est[l] += complex_normal(csi_rng, csi_std * csi_std * tap_pow[l]);
        }

        double err = 0.0;
        for (std::size_t l = 0; l < n_taps; ++l)
            err += std::norm(est[l] - h[l]);
        rep.est_err_power[k] = err;
        out.estimate[k] = std::move(est);
    }
    return out;
}

EqualizedFrame zero_forcing(const SymbolFrame& received, const std::vector<std::vector<cplx>>& estimate,
                            std::span<const double> epsilon) {
    const std::size_t n_slots = received.num_slots();
    if (estimate.size() != n_slots || epsilon.size() != n_slots)
        throw ConfigError("zero_forcing: estimate/epsilon count does not match slots");

    EqualizedFrame out{received, std::vector<bool>(n_slots, false)};
    Eigen::FFT<double> fft;
    for (std::size_t k = 0; k < n_slots; ++k) {
        const auto range = received.slots[k];
        const auto& est = estimate[k];
        if (est.empty())
            throw ConfigError("zero_forcing: empty channel estimate");
        auto first = out.frame.symbols.begin() + static_cast<std::ptrdiff_t>(range.begin);
        auto last = out.frame.symbols.begin() + static_cast<std::ptrdiff_t>(range.end);

        bool multi_tap = false;
        for (std::size_t l = 1; l < est.size(); ++l)
            multi_tap = multi_tap || est[l] != cplx{0.0, 0.0};

        if (!multi_tap) {
            if (std::abs(est[0]) <= epsilon[k]) {
                std::fill(first, last, cplx{0.0, 0.0});
                out.erased[k] = true;
                continue;
            }
            const cplx inv = 1.0 / est[0];
            for (auto it = first; it != last; ++it)
                *it *= inv;
            continue;
        }

        const std::size_t n = range.size();
        if (est.size() > n)
            throw ConfigError("zero_forcing: more taps than symbols per slot");
        std::vector<cplx> taps(n, cplx{0.0, 0.0});
        std::copy(est.begin(), est.end(), taps.begin());
        std::vector<cplx> H, Y, X;
        fft.fwd(H, taps);
        bool deep_fade = false;
        for (const auto& v : H)
            deep_fade = deep_fade || std::abs(v) <= epsilon[k];
        if (deep_fade) {
            std::fill(first, last, cplx{0.0, 0.0});
            out.erased[k] = true;
            continue;
        }
        std::vector<cplx> y(first, last);
        fft.fwd(Y, y);
        for (std::size_t i = 0; i < n; ++i)
            Y[i] /= H[i];
        fft.inv(X, Y);
        std::copy(X.begin(), X.end(), first);
    }
    return out;
}

LinkOutput run_link(const SymbolFrame& frame, const ChannelRealization& ch, const LinkConfig& cfg,
                    std::uint64_t seed) {
    auto tx = transmit(frame, ch, cfg, seed);
    auto eq = zero_forcing(tx.received, tx.estimate, tx.zf_epsilon);
    LinkOutput out{std::move(eq.frame), std::move(tx.report)};
    out.report.erased = std::move(eq.erased);

    const std::size_t n_data = frame.symbols.size() - frame.pad;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_data; ++i)
        acc += std::norm(out.equalized.symbols[i] - frame.symbols[i]);
    out.report.symbol_mse = n_data ? acc / static_cast<double>(n_data) : 0.0;
    return out;
}

} // namespace coopwd
