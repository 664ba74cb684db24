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
#include "coopwd/symbols.hpp"

#include "coopwd/error.hpp"

#include <cmath>
#include <string>

namespace coopwd {

double SymbolFrame::mean_power() const noexcept {
    if (symbols.empty())
        return 0.0;
    double acc = 0.0;
    for (const auto& s : symbols)
        acc += std::norm(s);
    return acc / static_cast<double>(symbols.size());
}

SymbolFrame to_symbols(const FeatureMap& f, std::size_t slot_len) {
    if (slot_len < 2 || slot_len % 2 != 0)
        throw ConfigError("slot length must be even and >= 2, got " + std::to_string(slot_len));
    if (f.empty())
        throw ConfigError("cannot map an empty tensor to symbols");

    auto d = f.data();
    const std::size_t n_data = (d.size() + 1) / 2;
    const std::size_t n_slots = (n_data + slot_len - 1) / slot_len;
    const std::size_t n_total = n_slots * slot_len;

    SymbolFrame frame;
    frame.symbols.assign(n_total, cplx{0.0, 0.0});
    frame.pad = n_total - n_data;
    for (std::size_t i = 0; i < n_data; ++i) {
        const double re = d[2 * i];
        const double im = 2 * i + 1 < d.size() ? d[2 * i + 1] : 0.0;
        frame.symbols[i] = {re, im};
    }

    double power = 0.0;
    for (const auto& s : frame.symbols)
        power += std::norm(s);
    power /= static_cast<double>(n_total);
    frame.scale = power > 0.0 ? std::sqrt(power) : 1.0;
    const double inv = 1.0 / frame.scale;
    for (auto& s : frame.symbols)
        s *= inv;

    frame.slots.reserve(n_slots);
    for (std::size_t k = 0; k < n_slots; ++k)
        frame.slots.push_back({k * slot_len, (k + 1) * slot_len});
    return frame;
}

FeatureMap from_symbols(const SymbolFrame& frame, Shape shape) {
    const std::size_t n = shape.size();
    const std::size_t n_data = (n + 1) / 2;
    if (frame.pad > frame.symbols.size() || frame.symbols.size() - frame.pad != n_data)
        throw ConfigError("symbol frame carries " + std::to_string(frame.symbols.size() - frame.pad) +
                          " data symbols, shape needs " + std::to_string(n_data));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n_data; ++i) {
        const cplx s = frame.symbols[i] * frame.scale;
        out[2 * i] = s.real();
        if (2 * i + 1 < n)
            out[2 * i + 1] = s.imag();
    }
    return FeatureMap(shape, std::move(out));
}

} // namespace coopwd
