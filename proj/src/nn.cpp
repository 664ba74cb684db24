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
#include "coopwd/nn.hpp"

#include "coopwd/error.hpp"
#include "coopwd/tensor_io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace coopwd::nn {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Idx = Eigen::Index;

void im2col(std::span<const double> x, std::size_t channels, Plane p, std::vector<double>& col) {
    const std::size_t hw = p.size();
    col.assign(channels * 9 * hw, 0.0);
    const auto H = static_cast<long>(p.height);
    const auto W = static_cast<long>(p.width);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = x.data() + c * hw;
        for (long ky = 0; ky < 3; ++ky)
            for (long kx = 0; kx < 3; ++kx) {
                double* dst = col.data() + ((c * 9) + static_cast<std::size_t>(ky * 3 + kx)) * hw;
                for (long h = 0; h < H; ++h) {
                    const long hh = h + ky - 1;
                    if (hh < 0 || hh >= H)
                        continue;
                    for (long w = 0; w < W; ++w) {
                        const long ww = w + kx - 1;
                        if (ww >= 0 && ww < W)
                            dst[h * W + w] = src[hh * W + ww];
                    }
                }
            }
    }
}

void col2im(std::span<const double> col, std::size_t channels, Plane p, std::span<double> dx) {
    const std::size_t hw = p.size();
    std::fill(dx.begin(), dx.end(), 0.0);
    const auto H = static_cast<long>(p.height);
    const auto W = static_cast<long>(p.width);
    for (std::size_t c = 0; c < channels; ++c) {
        double* dst = dx.data() + c * hw;
        for (long ky = 0; ky < 3; ++ky)
            for (long kx = 0; kx < 3; ++kx) {
                const double* src = col.data() + ((c * 9) + static_cast<std::size_t>(ky * 3 + kx)) * hw;
                for (long h = 0; h < H; ++h) {
                    const long hh = h + ky - 1;
                    if (hh < 0 || hh >= H)
                        continue;
                    for (long w = 0; w < W; ++w) {
                        const long ww = w + kx - 1;
                        if (ww >= 0 && ww < W)
                            dst[hh * W + ww] += src[h * W + w];
                    }
                }
            }
    }
}
} // namespace

// --- ParamSet -------------------------------------------------------------

std::size_t ParamSet::add(std::string name, std::vector<std::size_t> dims) {
    const std::size_t n = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    const std::size_t off = values_.size();
    values_.resize(off + n, 0.0);
    grads_.resize(off + n, 0.0);
    entries_.push_back({std::move(name), off, n, std::move(dims)});
    return off;
}

const ParamEntry& ParamSet::entry(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name)
            return e;
    throw ConfigError("no parameter block named " + name);
}

void ParamSet::zero_grad() noexcept { std::fill(grads_.begin(), grads_.end(), 0.0); }

bool ParamSet::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ParamSet::write(std::ostream& out) const {
    binio::write_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        binio::write_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        binio::write_u32(out, static_cast<std::uint32_t>(e.dims.size()));
        for (auto d : e.dims)
            binio::write_u32(out, static_cast<std::uint32_t>(d));
    }
    for (double v : values_)
        binio::write_f64(out, v);
}

void ParamSet::read(std::istream& in) {
    const auto n = binio::read_u32(in);
    if (n != entries_.size())
        throw IoError("parameter table has " + std::to_string(n) + " blocks, expected " +
                      std::to_string(entries_.size()));
    for (const auto& e : entries_) {
        const auto len = binio::read_u32(in);
        std::string name(len, '\0');
        if (!in.read(name.data(), len))
            throw IoError("truncated parameter table");
        const auto nd = binio::read_u32(in);
        std::vector<std::size_t> dims(nd);
        for (auto& d : dims)
            d = binio::read_u32(in);
        if (name != e.name || dims != e.dims)
            throw IoError("parameter block " + name + " does not match the expected layout (" + e.name + ")");
    }
    for (double& v : values_)
        v = binio::read_f64(in);
}

// --- Conv3x3 --------------------------------------------------------------

Conv3x3 Conv3x3::create(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out) {
    Conv3x3 c;
    c.in = in;
    c.out = out;
    c.w_off = ps.add(name + ".weight", {out, in, 3, 3});
    c.b_off = ps.add(name + ".bias", {out});
    return c;
}

void Conv3x3::init(ParamSet& ps, Rng& rng, double gain) const {
    std::normal_distribution<double> n(0.0, gain * std::sqrt(2.0 / static_cast<double>(in * 9)));
    double* w = ps.value_ptr(w_off);
    for (std::size_t i = 0; i < out * in * 9; ++i)
        w[i] = n(rng);
    std::fill(ps.value_ptr(b_off), ps.value_ptr(b_off) + out, 0.0);
}

void Conv3x3::forward(const ParamSet& ps, std::span<const double> x, Plane p, std::span<double> y,
                      std::vector<double>& col) const {
    im2col(x, in, p, col);
    const auto hw = static_cast<Idx>(p.size());
    CMapMat W(ps.value_ptr(w_off), static_cast<Idx>(out), static_cast<Idx>(in * 9));
    CMapMat C(col.data(), static_cast<Idx>(in * 9), hw);
    MapMat Y(y.data(), static_cast<Idx>(out), hw);
    Y.noalias() = W * C;
    Eigen::Map<const Eigen::VectorXd> b(ps.value_ptr(b_off), static_cast<Idx>(out));
    Y.colwise() += b;
}

void Conv3x3::backward(ParamSet& ps, std::span<const double> col, std::span<const double> dy, Plane p,
                       std::span<double> dx) const {
    const auto hw = static_cast<Idx>(p.size());
    CMapMat dY(dy.data(), static_cast<Idx>(out), hw);
    CMapMat C(col.data(), static_cast<Idx>(in * 9), hw);
    MapMat dW(ps.grad_ptr(w_off), static_cast<Idx>(out), static_cast<Idx>(in * 9));
    dW.noalias() += dY * C.transpose();
    Eigen::Map<Eigen::VectorXd> db(ps.grad_ptr(b_off), static_cast<Idx>(out));
    db += dY.rowwise().sum();
    if (!dx.empty()) {
        CMapMat W(ps.value_ptr(w_off), static_cast<Idx>(out), static_cast<Idx>(in * 9));
        std::vector<double> dcol(in * 9 * p.size());
        MapMat dC(dcol.data(), static_cast<Idx>(in * 9), hw);
        dC.noalias() = W.transpose() * dY;
        col2im(dcol, in, p, dx);
    }
}

// --- GroupNorm ------------------------------------------------------------

GroupNorm GroupNorm::create(ParamSet& ps, const std::string& name, std::size_t channels, std::size_t groups) {
    if (groups == 0 || channels % groups != 0)
        throw ConfigError("group count must divide the channel count");
    GroupNorm g;
    g.channels = channels;
    g.groups = groups;
    g.gamma_off = ps.add(name + ".gamma", {channels});
    g.beta_off = ps.add(name + ".beta", {channels});
    return g;
}

void GroupNorm::init(ParamSet& ps) const {
    std::fill(ps.value_ptr(gamma_off), ps.value_ptr(gamma_off) + channels, 1.0);
    std::fill(ps.value_ptr(beta_off), ps.value_ptr(beta_off) + channels, 0.0);
}

void GroupNorm::forward(const ParamSet& ps, std::span<const double> x, Plane p, std::span<double> y,
                        GroupNormCache& cache) const {
    const std::size_t hw = p.size();
    const std::size_t per = channels / groups;
    const std::size_t n = per * hw;
    cache.xhat.resize(channels * hw);
    cache.inv_std.resize(groups);
    const double* gamma = ps.value_ptr(gamma_off);
    const double* beta = ps.value_ptr(beta_off);
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * n;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += x[base + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        cache.inv_std[g] = inv;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = g * per + i / hw;
            const double xh = (x[base + i] - mean) * inv;
            cache.xhat[base + i] = xh;
            y[base + i] = gamma[c] * xh + beta[c];
        }
    }
}

void GroupNorm::backward(ParamSet& ps, const GroupNormCache& cache, std::span<const double> dy, Plane p,
                         std::span<double> dx) const {
    const std::size_t hw = p.size();
    const std::size_t per = channels / groups;
    const std::size_t n = per * hw;
    const double* gamma = ps.value_ptr(gamma_off);
    double* dgamma = ps.grad_ptr(gamma_off);
    double* dbeta = ps.grad_ptr(beta_off);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < hw; ++i) {
            dgamma[c] += dy[c * hw + i] * cache.xhat[c * hw + i];
            dbeta[c] += dy[c * hw + i];
        }
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * n;
        double sum_d = 0.0;
        double sum_dx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = dy[base + i] * gamma[g * per + i / hw];
            sum_d += d;
            sum_dx += d * cache.xhat[base + i];
        }
        const double inv = cache.inv_std[g];
        const double nn = static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = dy[base + i] * gamma[g * per + i / hw];
            dx[base + i] = inv / nn * (nn * d - sum_d - cache.xhat[base + i] * sum_dx);
        }
    }
}

// --- Activations ----------------------------------------------------------

void silu(std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] * sigmoid(x[i]);
}

void silu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = sigmoid(x[i]);
        dx[i] = dy[i] * s * (1.0 + x[i] * (1.0 - s));
    }
}

// --- Adam -----------------------------------------------------------------

void Adam::step(ParamSet& ps) {
    if (m.size() != ps.size()) {
        m.assign(ps.size(), 0.0);
        v.assign(ps.size(), 0.0);
        t = 0;
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    auto w = ps.values();
    auto g = ps.grads();
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

} // namespace coopwd::nn
