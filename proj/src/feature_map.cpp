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
#include "coopwd/feature_map.hpp"

#include "coopwd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coopwd {

FeatureMap::FeatureMap(Shape shape, std::int64_t frame, std::int64_t cav)
    : frame_id(frame), cav_id(cav), shape_(shape), data_(shape.size(), 0.0) {}

FeatureMap::FeatureMap(Shape shape, std::vector<double> data, std::int64_t frame, std::int64_t cav)
    : frame_id(frame), cav_id(cav), shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
        throw ConfigError("feature map data length " + std::to_string(data_.size()) +
                          " does not match shape size " + std::to_string(shape_.size()));
}

bool FeatureMap::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void FeatureMap::require_finite(const char* where) const {
    if (!all_finite())
        throw NumericalError(std::string("non-finite feature value at ") + where);
}

FeatureMap& FeatureMap::operator*=(double s) noexcept {
    for (double& v : data_)
        v *= s;
    return *this;
}

FeatureMap& FeatureMap::operator+=(const FeatureMap& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
    return *this;
}

FeatureMap operator*(double s, FeatureMap f) {
    f *= s;
    return f;
}

FeatureMap operator-(const FeatureMap& a, const FeatureMap& b) {
    require_same_shape(a, b, "operator-");
    FeatureMap out(a.shape(), a.frame_id, a.cav_id);
    auto o = out.data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = x[i] - y[i];
    return out;
}

void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* what) {
    if (a.shape() != b.shape())
        throw ConfigError(std::string("shape mismatch in ") + what);
}

double mse(const FeatureMap& a, const FeatureMap& b) {
    require_same_shape(a, b, "mse");
    if (a.empty())
        return 0.0;
    double acc = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double mean_square(const FeatureMap& f) noexcept {
    if (f.empty())
        return 0.0;
    double acc = 0.0;
    for (double v : f.data())
        acc += v * v;
    return acc / static_cast<double>(f.size());
}

std::vector<double> channel_mean(const FeatureMap& f) {
    const auto& s = f.shape();
    std::vector<double> out(s.plane(), 0.0);
    if (s.channels == 0)
        return out;
    auto d = f.data();
    for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t p = 0; p < s.plane(); ++p)
            out[p] += d[c * s.plane() + p];
    for (double& v : out)
        v /= static_cast<double>(s.channels);
    return out;
}

FeatureMap downsample2x(const FeatureMap& f) {
    const auto& s = f.shape();
    const Shape out_shape{s.channels, (s.height + 1) / 2, (s.width + 1) / 2};
    FeatureMap out(out_shape, f.frame_id, f.cav_id);
    for (std::size_t c = 0; c < s.channels; ++c)
        for (std::size_t h = 0; h < out_shape.height; ++h)
            for (std::size_t w = 0; w < out_shape.width; ++w) {
                double acc = 0.0;
                int n = 0;
                for (std::size_t dh = 0; dh < 2; ++dh)
                    for (std::size_t dw = 0; dw < 2; ++dw) {
                        const std::size_t hh = 2 * h + dh;
                        const std::size_t ww = 2 * w + dw;
                        if (hh < s.height && ww < s.width) {
                            acc += f.at(c, hh, ww);
                            ++n;
                        }
                    }
                out.at(c, h, w) = acc / n;
            }
    return out;
}

FeatureMap upsample2x(const FeatureMap& f, Shape target) {
    const auto& s = f.shape();
    if (target.channels != s.channels || (target.height + 1) / 2 != s.height ||
        (target.width + 1) / 2 != s.width)
        throw ConfigError("upsample2x target shape is not the pre-pool shape");
    FeatureMap out(target, f.frame_id, f.cav_id);
    for (std::size_t c = 0; c < target.channels; ++c)
        for (std::size_t h = 0; h < target.height; ++h)
            for (std::size_t w = 0; w < target.width; ++w)
                out.at(c, h, w) = f.at(c, h / 2, w / 2);
    return out;
}

} // namespace coopwd
