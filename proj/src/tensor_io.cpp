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
#include "coopwd/tensor_io.hpp"

#include "coopwd/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace coopwd {

namespace binio {

namespace {
template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}
} // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw IoError("truncated binary stream (u32)");
    return to_little(v);
}

double read_f64(std::istream& in) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw IoError("truncated binary stream (f64)");
    return to_little(v);
}

void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
    char got[4] = {};
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0)
        throw IoError(std::string("bad magic, expected ") + magic);
}

} // namespace binio

void write_tensor(std::ostream& out, const FeatureMap& f) {
    binio::write_magic(out, "CWDT");
    binio::write_u32(out, kTensorFileVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(f.shape().channels));
    binio::write_u32(out, static_cast<std::uint32_t>(f.shape().height));
    binio::write_u32(out, static_cast<std::uint32_t>(f.shape().width));
    for (double v : f.data())
        binio::write_f64(out, v);
}

FeatureMap read_tensor(std::istream& in) {
    binio::expect_magic(in, "CWDT");
    const auto version = binio::read_u32(in);
    if (version != kTensorFileVersion)
        throw IoError("unsupported tensor file version " + std::to_string(version));
    Shape s;
    s.channels = binio::read_u32(in);
    s.height = binio::read_u32(in);
    s.width = binio::read_u32(in);
    std::vector<double> data(s.size());
    for (double& v : data)
        v = binio::read_f64(in);
    return FeatureMap(s, std::move(data));
}

void save_tensor(const std::filesystem::path& path, const FeatureMap& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(out, f);
    if (!out)
        throw IoError("write failed: " + path.string());
}

FeatureMap load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return read_tensor(in);
}

} // namespace coopwd
