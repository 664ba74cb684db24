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
#include "coopwd/error.hpp"
#include "coopwd/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace coopwd {

namespace {

constexpr const char* kRecordsHeader =
    "experiment,config_hash,point_index,seed_index,seed,variant,channel,snr_db,pathloss_n,sigma_snr_db,sigma_csi,"
    "scenes,ap_loose,ap_strict,mse_pre,mse_post,mean_w,bypass_fraction,denoiser_calls,erased_slots";
constexpr const char* kRuntimeHeader =
    "experiment,point_index,seed_index,variant,link_s,weighting_s,denoising_s,fusion_s,recovery_s,total_s";

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

struct LineParser {
    std::size_t line;
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("line " + std::to_string(line) + ": " + msg);
    }
    double real(const std::string& s, const char* name) const {
        if (s.empty())
            fail(std::string("empty ") + name);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size() || std::isnan(v))
            fail(std::string("bad number for ") + name + ": '" + s + "'");
        return v;
    }
    std::uint64_t integer(const std::string& s, const char* name) const {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            fail(std::string("bad integer for ") + name + ": '" + s + "'");
        return v;
    }
};

std::string chomp(std::string s) {
    if (!s.empty() && s.back() == '\r')
        s.pop_back();
    return s;
}

// Keeps first-appearance order.
template <class T>
void add_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end())
        v.push_back(x);
}

struct AxisInfo {
    const char* name;
    const char* label;
    double SweepPoint::*field;
};
constexpr AxisInfo kAxes[] = {{"snr_db", "SNR dB", &SweepPoint::snr_db},
                              {"pathloss_n", "path-loss n", &SweepPoint::pathloss_n},
                              {"sigma_snr_db", "sigma_SNR dB", &SweepPoint::sigma_snr_db},
                              {"sigma_csi", "sigma_CSI", &SweepPoint::sigma_csi}};

struct Group {
    std::string experiment;
    ChannelKind channel;
    std::vector<Variant> variants;
    std::vector<std::size_t> points;
    std::map<std::size_t, SweepPoint> point_values;
    std::vector<const ExperimentRecord*> records;
};

std::vector<Group> group_by_experiment(const std::vector<ExperimentRecord>& records) {
    std::vector<Group> groups;
    for (const auto& r : records) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.experiment == r.experiment; });
        if (it == groups.end()) {
            groups.push_back({r.experiment, r.channel, {}, {}, {}, {}});
            it = groups.end() - 1;
        }
        add_unique(it->variants, r.variant);
        add_unique(it->points, r.point_index);
        it->point_values[r.point_index] = r.point;
        it->records.push_back(&r);
    }
    for (auto& g : groups)
        std::sort(g.points.begin(), g.points.end());
    return groups;
}

std::vector<const AxisInfo*> varying_axes(const Group& g) {
    std::vector<const AxisInfo*> out;
    for (const auto& a : kAxes) {
        std::vector<double> vals;
        for (const auto& [i, p] : g.point_values)
            add_unique(vals, p.*a.field);
        if (vals.size() > 1)
            out.push_back(&a);
    }
    return out;
}

std::string point_label(const Group& g, std::size_t point) {
    auto axes = varying_axes(g);
    if (axes.empty())
        axes.push_back(&kAxes[0]);
    std::string s;
    for (const auto* a : axes) {
        if (!s.empty())
            s += ", ";
        s += std::string(a->label) + " " + label(g.point_values.at(point).*a->field);
    }
    return s;
}

struct Cell {
    double ap_loose = 0, ap_strict = 0, mse_pre = 0, mse_post = 0, mean_w = 0, bypass = 0, recovery_per_scene = 0;
    std::size_t n = 0;
};

Cell cell(const Group& g, Variant v, std::size_t point) {
    Cell c;
    for (const auto* r : g.records) {
        if (r->variant != v || r->point_index != point)
            continue;
        c.ap_loose += r->ap_loose;
        c.ap_strict += r->ap_strict;
        c.mse_pre += r->mse_pre;
        c.mse_post += r->mse_post;
        c.mean_w += r->mean_w;
        c.bypass += r->bypass_fraction;
        c.recovery_per_scene += r->times.recovery() / static_cast<double>(std::max<std::size_t>(r->scenes, 1));
        ++c.n;
    }
    if (c.n > 0) {
        const double n = static_cast<double>(c.n);
        c.ap_loose /= n;
        c.ap_strict /= n;
        c.mse_pre /= n;
        c.mse_post /= n;
        c.mean_w /= n;
        c.bypass /= n;
        c.recovery_per_scene /= n;
    }
    return c;
}

template <class F>
void table(std::ostream& md, const Group& g, const std::vector<Variant>& rows, F&& render) {
    md << "| variant |";
    for (auto p : g.points)
        md << ' ' << point_label(g, p) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < g.points.size(); ++i)
        md << "---|";
    md << '\n';
    for (auto v : rows) {
        md << "| " << to_string(v) << " |";
        for (auto p : g.points) {
            const Cell c = cell(g, v, p);
            md << ' ' << (c.n ? render(c) : std::string("-")) << " |";
        }
        md << '\n';
    }
    md << '\n';
}

} // namespace

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
    out << kRecordsSchema << '\n' << kRecordsHeader << '\n';
    for (const auto& r : records) {
        out << r.experiment << ',' << r.config_hash << ',' << r.point_index << ',' << r.seed_index << ',' << r.seed
            << ',' << to_string(r.variant) << ',' << to_string(r.channel) << ',' << fmt(r.point.snr_db) << ','
            << fmt(r.point.pathloss_n) << ',' << fmt(r.point.sigma_snr_db) << ',' << fmt(r.point.sigma_csi) << ','
            << r.scenes << ',' << fmt(r.ap_loose) << ',' << fmt(r.ap_strict) << ',' << fmt(r.mse_pre) << ','
            << fmt(r.mse_post) << ',' << fmt(r.mean_w) << ',' << fmt(r.bypass_fraction) << ',' << r.denoiser_calls
            << ',' << r.erased_slots << '\n';
    }
}

void write_runtime_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
    out << kRuntimeSchema << '\n' << kRuntimeHeader << '\n';
    for (const auto& r : records) {
        const auto& t = r.times;
        out << r.experiment << ',' << r.point_index << ',' << r.seed_index << ',' << to_string(r.variant) << ','
            << fmt(t.link) << ',' << fmt(t.weighting) << ',' << fmt(t.denoising) << ',' << fmt(t.fusion) << ','
            << fmt(t.recovery()) << ',' << fmt(t.total()) << '\n';
    }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || chomp(line) != kRecordsSchema)
        throw ConfigError("line 1: expected schema line '" + std::string(kRecordsSchema) + "'");
    if (!std::getline(in, line) || chomp(line) != kRecordsHeader)
        throw ConfigError("line 2: header does not match records schema v1");
    std::vector<ExperimentRecord> out;
    for (std::size_t n = 3; std::getline(in, line); ++n) {
        line = chomp(line);
        if (line.empty())
            continue;
        const LineParser p{n};
        const auto f = split(line);
        if (f.size() != 20)
            p.fail("expected 20 fields, found " + std::to_string(f.size()));
        ExperimentRecord r;
        try {
            r.experiment = f[0];
            r.config_hash = f[1];
            r.point_index = p.integer(f[2], "point_index");
            r.seed_index = p.integer(f[3], "seed_index");
            r.seed = p.integer(f[4], "seed");
            r.variant = parse_variant(f[5]);
            r.channel = parse_channel(f[6]);
        } catch (const ConfigError& e) {
            if (std::string(e.what()).rfind("line ", 0) == 0)
                throw;
            p.fail(e.what());
        }
        r.point.index = r.point_index;
        r.point.snr_db = p.real(f[7], "snr_db");
        r.point.pathloss_n = p.real(f[8], "pathloss_n");
        r.point.sigma_snr_db = p.real(f[9], "sigma_snr_db");
        r.point.sigma_csi = p.real(f[10], "sigma_csi");
        r.scenes = p.integer(f[11], "scenes");
        r.ap_loose = p.real(f[12], "ap_loose");
        r.ap_strict = p.real(f[13], "ap_strict");
        r.mse_pre = p.real(f[14], "mse_pre");
        r.mse_post = p.real(f[15], "mse_post");
        r.mean_w = p.real(f[16], "mean_w");
        r.bypass_fraction = p.real(f[17], "bypass_fraction");
        r.denoiser_calls = p.integer(f[18], "denoiser_calls");
        r.erased_slots = p.integer(f[19], "erased_slots");
        if (r.ap_loose < 0 || r.ap_loose > 1 || r.ap_strict < 0 || r.ap_strict > 1)
            p.fail("proxy-AP outside [0, 1]");
        if (r.bypass_fraction < 0 || r.bypass_fraction > 1)
            p.fail("bypass fraction outside [0, 1]");
        out.push_back(std::move(r));
    }
    return out;
}

void read_runtime_csv(std::istream& in, std::vector<ExperimentRecord>& records) {
    std::string line;
    if (!std::getline(in, line) || chomp(line) != kRuntimeSchema)
        throw ConfigError("line 1: expected schema line '" + std::string(kRuntimeSchema) + "'");
    if (!std::getline(in, line) || chomp(line) != kRuntimeHeader)
        throw ConfigError("line 2: header does not match runtime schema v1");
    for (std::size_t n = 3; std::getline(in, line); ++n) {
        line = chomp(line);
        if (line.empty())
            continue;
        const LineParser p{n};
        const auto f = split(line);
        if (f.size() != 10)
            p.fail("expected 10 fields, found " + std::to_string(f.size()));
        const auto point = p.integer(f[1], "point_index");
        const auto seed = p.integer(f[2], "seed_index");
        Variant v{};
        try {
            v = parse_variant(f[3]);
        } catch (const ConfigError& e) {
            p.fail(e.what());
        }
        StageTimes t{p.real(f[4], "link_s"), p.real(f[5], "weighting_s"), p.real(f[6], "denoising_s"),
                     p.real(f[7], "fusion_s")};
        if (t.link < 0 || t.weighting < 0 || t.denoising < 0 || t.fusion < 0)
            p.fail("negative stage time");
        bool found = false;
        for (auto& r : records)
            if (r.experiment == f[0] && r.point_index == point && r.seed_index == seed && r.variant == v) {
                r.times = t;
                found = true;
            }
        if (!found)
            p.fail("runtime row has no matching record");
    }
}

std::string report_markdown(const std::vector<ExperimentRecord>& records, bool with_runtime) {
    std::ostringstream md;
    md << "# coopwd results\n\n";
    if (records.empty()) {
        md << "No records.\n";
        return md.str();
    }
    md << "Config hash `" << records.front().config_hash << "`. Cells average all seeds of a sweep point.\n\n";
    for (const auto& g : group_by_experiment(records)) {
        md << "## " << g.experiment << " (" << to_string(g.channel) << " channel)\n\n";
        md << "Proxy-AP at 2 px / 1 px:\n\n";
        table(md, g, g.variants, [](const Cell& c) { return fixed(c.ap_loose, 3) + " / " + fixed(c.ap_strict, 3); });

        md << "Feature MSE, received -> recovered:\n\n";
        table(md, g, g.variants,
              [](const Cell& c) { return fixed(c.mse_pre, 4) + " -> " + fixed(c.mse_post, 4); });

        std::vector<Variant> weighted;
        for (auto v : g.variants)
            if (uses_weighting(v))
                weighted.push_back(v);
        if (!weighted.empty()) {
            md << "Mean W and denoiser bypass fraction:\n\n";
            table(md, g, weighted, [](const Cell& c) { return fixed(c.mean_w, 3) + ", " + fixed(c.bypass, 2); });
        }
        if (with_runtime) {
            md << "Recovery-stack time per scene in ms, with proxy-AP at 2 px:\n\n";
            table(md, g, g.variants, [](const Cell& c) {
                return fixed(1e3 * c.recovery_per_scene, 2) + " (" + fixed(c.ap_loose, 3) + ")";
            });
        }
    }
    return md.str();
}

std::vector<std::filesystem::path> write_plots(const std::vector<ExperimentRecord>& records,
                                               const std::filesystem::path& dir) {
    static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"};
    std::vector<std::filesystem::path> files;
    for (const auto& g : group_by_experiment(records)) {
        for (const auto* axis : varying_axes(g)) {
            std::vector<double> xs;
            for (const auto& [i, p] : g.point_values)
                if (std::isfinite(p.*axis->field))
                    add_unique(xs, p.*axis->field);
            if (xs.size() < 2)
                continue;
            std::sort(xs.begin(), xs.end());
            const double x0 = xs.front(), x1 = xs.back();

            std::ostringstream svg;
            const int W = 760, H = 340, pw = 300, ph = 230, top = 40, left0 = 60, gap = 80;
            svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
                << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
            svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
            for (int panel = 0; panel < 2; ++panel) {
                const int left = left0 + panel * (pw + gap);
                auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
                auto py = [&](double y) { return top + (1.0 - y) * ph; };
                svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << top - 12 << "\" text-anchor=\"middle\">"
                    << g.experiment << ": proxy-AP at " << (panel == 0 ? "2 px" : "1 px") << "</text>\n";
                svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
                    << "\" fill=\"none\" stroke=\"#333\"/>\n";
                for (double y : {0.0, 0.25, 0.5, 0.75, 1.0})
                    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
                        << fixed(y, 2) << "</text>\n";
                for (double x : xs)
                    svg << "<text x=\"" << px(x) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
                        << label(x) << "</text>\n";
                svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 34 << "\" text-anchor=\"middle\">"
                    << axis->label << "</text>\n";
                for (std::size_t vi = 0; vi < g.variants.size(); ++vi) {
                    svg << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << colors[vi % 5] << "\" points=\"";
                    for (double x : xs) {
                        double sum = 0.0;
                        std::size_t n = 0;
                        for (const auto* r : g.records)
                            if (r->variant == g.variants[vi] && r->point.*axis->field == x) {
                                sum += panel == 0 ? r->ap_loose : r->ap_strict;
                                ++n;
                            }
                        if (n > 0)
                            svg << px(x) << ',' << py(sum / static_cast<double>(n)) << ' ';
                    }
                    svg << "\"/>\n";
                    if (panel == 1)
                        svg << "<text x=\"" << left + pw + 8 << "\" y=\"" << top + 14 + 16 * static_cast<int>(vi)
                            << "\" fill=\"" << colors[vi % 5] << "\">" << to_string(g.variants[vi]) << "</text>\n";
                }
            }
            svg << "</svg>\n";
            const auto path = dir / ("plot_" + g.experiment + "_" + axis->name + ".svg");
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw IoError("cannot write " + path.string());
            f << svg.str();
            files.push_back(path);
        }
    }
    return files;
}

} // namespace coopwd
