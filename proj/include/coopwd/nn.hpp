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

// Minimal 64-bit convolutional building blocks with explicit backward passes.
// Activations are (channels x H*W) row-major buffers for one sample.

#include "coopwd/rng.hpp"

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace coopwd::nn {

struct ParamEntry {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    std::vector<std::size_t> dims;
};

/// Flat parameter storage with a matching gradient buffer.
class ParamSet {
  public:
    std::size_t add(std::string name, std::vector<std::size_t> dims);

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> grads() noexcept { return grads_; }
    [[nodiscard]] std::span<const double> grads() const noexcept { return grads_; }
    [[nodiscard]] const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const ParamEntry& entry(const std::string& name) const;

    [[nodiscard]] double* value_ptr(std::size_t offset) noexcept { return values_.data() + offset; }
    [[nodiscard]] const double* value_ptr(std::size_t offset) const noexcept { return values_.data() + offset; }
    [[nodiscard]] double* grad_ptr(std::size_t offset) noexcept { return grads_.data() + offset; }

    void zero_grad() noexcept;
    [[nodiscard]] bool all_finite() const noexcept;

    /// Layer table (name, dims) followed by the little-endian f64 values.
    void write(std::ostream& out) const;
    /// Reads a table written by write() and checks it matches this layout.
    void read(std::istream& in);

  private:
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<ParamEntry> entries_;
};

struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    [[nodiscard]] std::size_t size() const noexcept { return height * width; }
};

/// 3x3 convolution, stride 1, zero padding 1.
struct Conv3x3 {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w_off = 0;
    std::size_t b_off = 0;

    static Conv3x3 create(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out);
    void init(ParamSet& ps, Rng& rng, double gain = 1.0) const;

    /// col receives the im2col buffer (in*9 x HW) needed by backward().
    void forward(const ParamSet& ps, std::span<const double> x, Plane p, std::span<double> y,
                 std::vector<double>& col) const;
    /// Accumulates parameter gradients; writes dx when non-empty.
    void backward(ParamSet& ps, std::span<const double> col, std::span<const double> dy, Plane p,
                  std::span<double> dx) const;
};

struct GroupNormCache {
    std::vector<double> xhat;
    std::vector<double> inv_std;
};

struct GroupNorm {
    std::size_t channels = 0;
    std::size_t groups = 1;
    std::size_t gamma_off = 0;
    std::size_t beta_off = 0;
    double eps = 1e-5;

    static GroupNorm create(ParamSet& ps, const std::string& name, std::size_t channels, std::size_t groups);
    void init(ParamSet& ps) const;
    void forward(const ParamSet& ps, std::span<const double> x, Plane p, std::span<double> y,
                 GroupNormCache& cache) const;
    void backward(ParamSet& ps, const GroupNormCache& cache, std::span<const double> dy, Plane p,
                  std::span<double> dx) const;
};

/// Swish / SiLU: x * sigmoid(x).
void silu(std::span<const double> x, std::span<double> y);
/// dx = dy * silu'(x)
void silu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);

[[nodiscard]] inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

/// Adaptive-moment optimiser over a whole ParamSet.
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<double> m;
    std::vector<double> v;

    void step(ParamSet& ps);
};

} // namespace coopwd::nn
