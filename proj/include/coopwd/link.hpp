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

#include "coopwd/channel.hpp"
#include "coopwd/symbols.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace coopwd {

enum class CsiMode { perfect, ls_estimate };

/// Where snr_db is referenced. `receiver`: per-slot SNR after path loss and
/// mean fading power (noise scales with the expected received power).
/// `transmitter`: noise variance is 10^(-snr/10) relative to unit transmit
/// power, so path loss lowers the effective SNR.
enum class SnrReference { receiver, transmitter };

struct LinkConfig {
    double snr_db = 20.0; ///< +inf disables noise
    std::size_t pilots_per_slot = 8;
    CsiMode csi_mode = CsiMode::ls_estimate;
    double extra_csi_error_std = 0.0;
    /// Optional per-slot overrides from a DisturbanceProcess; empty = none.
    std::vector<double> slot_snr_offset_db;
    std::vector<double> slot_csi_error_std;
    SnrReference snr_reference = SnrReference::receiver;
    /// ZF guard relative to sqrt(E|h|^2) of the slot.
    double zf_epsilon_rel = 1e-3;

    void validate() const;
};

struct LinkReport {
    std::vector<double> snr_db_effective;
    std::vector<double> est_err_power; ///< sum over taps of |h_hat - h|^2
    std::vector<bool> erased;
    double symbol_mse = 0.0;  ///< over data symbols, normalised domain
    double feature_mse = 0.0; ///< filled by callers that know the source tensor

    [[nodiscard]] std::size_t erased_count() const noexcept;
    /// CSV rows: slot,snr_db_effective,est_err_power,erased
    void write_csv(std::ostream& out) const;
};

/// Channel output before equalisation.
struct TransmitResult {
    SymbolFrame received;                          ///< data symbols after channel + AWGN
    std::vector<std::vector<cplx>> rx_pilots;       ///< [slot][pilot]
    std::vector<std::vector<cplx>> estimate;        ///< [slot][lag] channel estimate
    std::vector<std::vector<cplx>> true_taps;       ///< [slot][lag] actual channel
    std::vector<double> zf_epsilon;                 ///< [slot]
    LinkReport report;
};

/// Deterministic unit-power QPSK pilot block of length n.
[[nodiscard]] std::vector<cplx> pilot_sequence(std::size_t n);

/// Circular convolution of one block with lag-indexed taps.
[[nodiscard]] std::vector<cplx> circular_convolve(std::span<const cplx> block, std::span<const cplx> taps);

/// Dense lag-indexed tap vector (length num_taps) of one channel slot.
[[nodiscard]] std::vector<cplx> tap_vector(const std::vector<Tap>& slot, std::size_t num_taps);

/// y = h * x + w per slot; pilots at the slot head; channel estimate per csi_mode.
/// Throws ConfigError when the frame and channel slot counts differ.
[[nodiscard]] TransmitResult transmit(const SymbolFrame& frame, const ChannelRealization& ch,
                                      const LinkConfig& cfg, std::uint64_t seed);

/// Least-squares tap estimate from one pilot block:
/// h_hat = (X^H X)^-1 X^H y with X the circulant pilot matrix. With one tap this
/// is sum(y conj(x)) / sum |x|^2. Throws ConfigError on zero-power pilots or too
/// few pilots for the tap count.
[[nodiscard]] std::vector<cplx> estimate_ls(std::span<const cplx> rx_pilots, std::span<const cplx> known_pilots,
                                            std::size_t num_taps = 1);

struct EqualizedFrame {
    SymbolFrame frame;
    std::vector<bool> erased;
};

/// Scalar division for one-tap estimates; otherwise per-bin division in the
/// slot's DFT domain (the slot block is cyclically extended on the air).
/// Slots whose |h_hat| (or any |H_hat[k]|) is <= epsilon are zeroed and flagged.
[[nodiscard]] EqualizedFrame zero_forcing(const SymbolFrame& received, const std::vector<std::vector<cplx>>& estimate,
                                          std::span<const double> epsilon);

struct LinkOutput {
    SymbolFrame equalized;
    LinkReport report;
};

/// transmit + zero_forcing, with erasures and symbol MSE written to the report.
[[nodiscard]] LinkOutput run_link(const SymbolFrame& frame, const ChannelRealization& ch, const LinkConfig& cfg,
                                  std::uint64_t seed);

} // namespace coopwd
