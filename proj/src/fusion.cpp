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
#include "coopwd/fusion.hpp"

#include "coopwd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coopwd {

void FusionConfig::validate() const {
    if (!(temperature > 0.0))
        throw ConfigError("fusion temperature must be > 0");
}

FeatureMap fuse(const FusionConfig& cfg, const FeatureMap& ego, std::span<const FeatureMap> cavs) {
    cfg.validate();
    for (const auto& f : cavs)
        require_same_shape(ego, f, "fuse");
    const auto& s = ego.shape();
    const std::size_t n_maps = cavs.size() + 1;
    auto map_at = [&](std::size_t i) -> const FeatureMap& { return i == 0 ? ego : cavs[i - 1]; };

    FeatureMap out(s, ego.frame_id, ego.cav_id);
    auto o = out.data();
    if (cfg.mode == FusionMode::mean) {
        for (std::size_t i = 0; i < n_maps; ++i) {
            auto d = map_at(i).data();
            for (std::size_t j = 0; j < o.size(); ++j)
                o[j] += d[j];
        }
        for (double& v : o)
            v /= static_cast<double>(n_maps);
        return out;
    }

    const std::size_t hw = s.plane();
    std::vector<double> logits(n_maps);
    for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t i = 0; i < n_maps; ++i) {
            double acc = 0.0;
            for (std::size_t c = 0; c < s.channels; ++c) {
                const double v = map_at(i).data()[c * hw + p];
                acc += v * v;
            }
            logits[i] = std::sqrt(acc) / cfg.temperature;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            denom += l;
        }
        for (std::size_t c = 0; c < s.channels; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n_maps; ++i)
                acc += logits[i] / denom * map_at(i).data()[c * hw + p];
            o[c * hw + p] = acc;
        }
    }
    return out;
}

namespace {
double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

// Vertex offset of a parabola through (-1, a), (0, b), (1, c), clamped to half a pixel.
double parabolic_offset(double a, double b, double c) {
    const double denom = a - 2.0 * b + c;
    if (denom >= 0.0)
        return 0.0;
    return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}
} // namespace

std::vector<Detection> detect_peaks(const FeatureMap& f, double mad_k) {
    const auto& s = f.shape();
    const auto sal = channel_mean(f);
    if (sal.empty())
        return {};
    const double med = median_of(sal);
    // Noise scale from horizontal neighbour differences: smooth objects barely
    // move it, white noise does (difference variance is twice the noise variance).
    std::vector<double> diffs;
    for (std::size_t h = 0; h < s.height; ++h)
        for (std::size_t w = 1; w < s.width; ++w)
            diffs.push_back(std::abs(sal[h * s.width + w] - sal[h * s.width + w - 1]));
    const double sigma = diffs.empty() ? 0.0 : 1.4826 * median_of(diffs) / std::sqrt(2.0);
    const double thr = med + mad_k * sigma;

    const auto H = static_cast<long>(s.height);
    const auto W = static_cast<long>(s.width);
    auto at = [&](long h, long w) { return sal[static_cast<std::size_t>(h * W + w)]; };

    std::vector<Detection> peaks;
    for (long h = 0; h < H; ++h)
        for (long w = 0; w < W; ++w) {
            const double v = at(h, w);
            if (!(v > thr))
                continue;
            bool is_max = true;
            for (long dh = -1; dh <= 1 && is_max; ++dh)
                for (long dw = -1; dw <= 1; ++dw) {
                    if (dh == 0 && dw == 0)
                        continue;
                    const long hh = h + dh, ww = w + dw;
                    if (hh < 0 || hh >= H || ww < 0 || ww >= W)
                        continue;
                    const double u = at(hh, ww);
                    // Plateaus keep only their first pixel in raster order.
                    if (u > v || (u == v && (dh < 0 || (dh == 0 && dw < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max)
                continue;
            double r = static_cast<double>(h);
            double c = static_cast<double>(w);
            if (h > 0 && h < H - 1)
                r += parabolic_offset(at(h - 1, w), v, at(h + 1, w));
            if (w > 0 && w < W - 1)
                c += parabolic_offset(at(h, w - 1), v, at(h, w + 1));
            peaks.push_back({r, c, v});
        }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return peaks;
}

double average_precision_11pt(const std::vector<bool>& tp, std::size_t num_truth) {
    if (num_truth == 0)
        return tp.empty() ? 1.0 : 0.0;
    std::vector<double> precision, recall;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
        hits += tp[i] ? 1 : 0;
        precision.push_back(static_cast<double>(hits) / static_cast<double>(i + 1));
        recall.push_back(static_cast<double>(hits) / static_cast<double>(num_truth));
    }
    double ap = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double r = k / 10.0;
        double best = 0.0;
        for (std::size_t i = 0; i < precision.size(); ++i)
            if (recall[i] >= r - 1e-12)
                best = std::max(best, precision[i]);
        ap += best;
    }
    return ap / 11.0;
}

DetectionResult detect_and_score(const FeatureMap& fused, std::span<const Point> truth,
                                 std::span<const double> thresholds_px) {
    if (fused.empty())
        throw ConfigError("detect_and_score needs a non-empty map");
    DetectionResult res;
    res.peaks = detect_peaks(fused);
    res.thresholds_px.assign(thresholds_px.begin(), thresholds_px.end());
    for (double thr : thresholds_px) {
        std::vector<bool> used(truth.size(), false);
        std::vector<bool> tp(res.peaks.size(), false);
        for (std::size_t i = 0; i < res.peaks.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_j = truth.size();
            for (std::size_t j = 0; j < truth.size(); ++j) {
                if (used[j])
                    continue;
                const double d = std::hypot(res.peaks[i].row - truth[j].row, res.peaks[i].col - truth[j].col);
                if (d <= thr && d < best) {
                    best = d;
                    best_j = j;
                }
            }
            if (best_j < truth.size()) {
                used[best_j] = true;
                tp[i] = true;
            }
        }
        res.ap.push_back(average_precision_11pt(tp, truth.size()));
        res.matched.push_back(std::move(tp));
    }
    return res;
}

} // namespace coopwd
