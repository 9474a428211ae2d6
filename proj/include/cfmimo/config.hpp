// SPDX-License-Identifier: Apache-2.0
//
// cfmimo: hybrid beamforming and pilot assignment for cell-free massive MIMO
// Copyright (C) 2026 The cfmimo authors
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

#ifndef CFMIMO_CONFIG_HPP
#define CFMIMO_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cfmimo/core.hpp"

namespace cfmimo
{

// ---------------------------------------------------------------------------
// Config documents
//
// A small TOML subset: `key = value` lines, `[table]` headers, `#` comments.
// Values are numbers, bare words, double-quoted strings or one-line arrays
// `[a, b, c]`. Tables only group keys for the reader; lookup is by bare key
// name and a key may appear once per document.
// ---------------------------------------------------------------------------

struct ConfigValue
{
    std::vector<std::string> items;
    bool is_array = false;
    std::size_t line = 0;
};

class ConfigDocument
{
  public:
    static ConfigDocument parse(const std::string& text)
    {
        ConfigDocument doc;
        std::istringstream in(text);
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const std::string line = trim(strip_comment(raw));
            if (line.empty())
                continue;
            if (line.front() == '[' && line.find('=') == std::string::npos) {
                if (line.back() != ']' || line.size() < 3)
                    throw ConfigError("parse error at line " + std::to_string(line_no) + ": bad table header");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("parse error at line " + std::to_string(line_no) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string rhs = trim(line.substr(eq + 1));
            if (key.empty() || rhs.empty())
                throw ConfigError("parse error at line " + std::to_string(line_no) + ": empty key or value");
            if (doc.values_.count(key))
                throw ConfigError("duplicate key " + key + " at line " + std::to_string(line_no));
            ConfigValue v;
            v.line = line_no;
            if (rhs.front() == '[') {
                if (rhs.back() != ']')
                    throw ConfigError("parse error at line " + std::to_string(line_no) + ": unterminated array");
                v.is_array = true;
                const std::string body = trim(rhs.substr(1, rhs.size() - 2));
                if (!body.empty()) {
                    std::stringstream ss(body);
                    std::string item;
                    while (std::getline(ss, item, ','))
                        v.items.push_back(unquote(trim(item), line_no));
                    if (!v.items.empty() && v.items.back().empty())
                        v.items.pop_back(); // trailing comma
                }
            }
            else {
                v.items.push_back(unquote(rhs, line_no));
            }
            doc.values_[key] = v;
            doc.order_.push_back(key);
        }
        return doc;
    }

    static ConfigDocument load(const std::string& path)
    {
        std::ifstream f(path);
        if (!f)
            throw ConfigError("cannot open config file " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::vector<std::string>& keys() const { return order_; }

    std::string get_string(const std::string& key) const
    {
        const ConfigValue& v = scalar(key);
        return v.items.front();
    }

    double get_double(const std::string& key) const
    {
        return to_double(key, scalar(key).items.front());
    }

    std::int64_t get_int(const std::string& key) const
    {
        const double d = get_double(key);
        if (!std::isfinite(d) || d != std::floor(d) || std::abs(d) > 9.0e15)
            throw ConfigError(key + " must be an integer");
        return static_cast<std::int64_t>(d);
    }

    std::vector<double> get_doubles(const std::string& key) const
    {
        const ConfigValue& v = find(key);
        if (!v.is_array)
            throw ConfigError(key + " must be an array");
        std::vector<double> out;
        for (const auto& s : v.items)
            out.push_back(to_double(key, s));
        return out;
    }

  private:
    std::map<std::string, ConfigValue> values_;
    std::vector<std::string> order_;

    const ConfigValue& find(const std::string& key) const
    {
        auto it = values_.find(key);
        if (it == values_.end())
            throw ConfigError("missing key " + key);
        return it->second;
    }

    const ConfigValue& scalar(const std::string& key) const
    {
        const ConfigValue& v = find(key);
        if (v.is_array || v.items.size() != 1)
            throw ConfigError(key + " must be a scalar");
        return v;
    }

    static double to_double(const std::string& key, const std::string& s)
    {
        if (s == "inf" || s == "+inf")
            return std::numeric_limits<double>::infinity();
        try {
            std::size_t pos = 0;
            const double d = std::stod(s, &pos);
            if (pos != s.size())
                throw ConfigError(key + " is not a number");
            return d;
        }
        catch (const std::logic_error&) {
            throw ConfigError(key + " is not a number");
        }
    }

    static std::string strip_comment(const std::string& s)
    {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"')
                quoted = !quoted;
            else if (s[i] == '#' && !quoted)
                return s.substr(0, i);
        }
        return s;
    }

    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
            return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::string unquote(const std::string& s, std::size_t line_no)
    {
        if (!s.empty() && s.front() == '"') {
            if (s.size() < 2 || s.back() != '"')
                throw ConfigError("parse error at line " + std::to_string(line_no) + ": unterminated string");
            return s.substr(1, s.size() - 2);
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

enum class ApLayout
{
    grid,
    uniform
};

enum class PilotObjective
{
    uplink,
    downlink
};

struct Scenario
{
    // network
    std::size_t num_aps = 12;         // M
    std::size_t antennas_per_ap = 32; // N
    std::size_t rf_chains = 8;        // L
    std::size_t num_ues = 16;         // K
    std::size_t pilot_len = 8;        // tau
    std::size_t coherence = 200;      // tau_c

    // powers in watts; ρ is relative to the noise power
    double ue_power = 0.2;
    double pilot_power = 0.2;
    double noise_dbm = -96.0;
    double rzf_reg = 1e-4;

    double serve_radius = 90.0;
    double conv_tol = 1e-3;

    // geometry and propagation
    double area_side = 200.0;
    double carrier_ghz = 2.0;
    double ap_height = 10.0;
    double ue_height = 1.5;
    double angular_spread_deg = 10.0; // inf selects i.i.d. Rayleigh
    double shadow_std_db = 4.0;
    double shadow_decorr_m = 9.0;
    ApLayout ap_layout = ApLayout::grid;
    double ap_jitter = 0.2; // fraction of the grid pitch

    std::uint64_t seed = 1;

    // experiment defaults, overridable from the command line
    std::size_t drops = 50;
    std::size_t blocks = 200;
    std::size_t calibration_blocks = 2000;
    PilotObjective pilot_objective = PilotObjective::uplink;

    // optional fixed positions (meters)
    std::vector<double> ap_x, ap_y, ue_x, ue_y;

    double noise_power() const { return std::pow(10.0, (noise_dbm - 30.0) / 10.0); }
    bool iid_fading() const { return std::isinf(angular_spread_deg); }
    double angular_spread_rad() const { return angular_spread_deg * pi / 180.0; }
    double pilot_overhead_factor() const
    {
        return 1.0 - static_cast<double>(pilot_len) / static_cast<double>(coherence);
    }

    // Throws ConfigError naming the first violated field.
    void validate() const
    {
        auto need = [](bool ok, const char* field) {
            if (!ok)
                throw ConfigError(std::string(field) + " out of range");
        };
        need(num_aps >= 1, "num_aps");
        need(antennas_per_ap >= 1, "antennas_per_ap");
        need(rf_chains >= 1 && rf_chains <= antennas_per_ap, "rf_chains");
        need(num_ues >= 1, "num_ues");
        need(pilot_len >= 1, "pilot_len");
        need(coherence >= pilot_len, "coherence");
        need(ue_power > 0.0 && std::isfinite(ue_power), "ue_power_w");
        need(pilot_power > 0.0 && std::isfinite(pilot_power), "pilot_power_w");
        need(std::isfinite(noise_dbm), "noise_dbm");
        need(rzf_reg > 0.0 && std::isfinite(rzf_reg), "rzf_reg");
        need(serve_radius > 0.0, "serve_radius_m");
        need(conv_tol > 0.0, "conv_tol");
        need(area_side > 0.0 && std::isfinite(area_side), "area_side_m");
        need(carrier_ghz > 0.0, "carrier_ghz");
        need(ap_height >= 0.0, "ap_height_m");
        need(angular_spread_deg >= 0.0, "angular_spread_deg");
        need(shadow_std_db >= 0.0, "shadow_std_db");
        need(shadow_decorr_m > 0.0, "shadow_decorr_m");
        need(ap_jitter >= 0.0 && ap_jitter <= 1.0, "ap_jitter");
        need(drops >= 1, "drops");
        need(blocks >= 1, "blocks");
        need(calibration_blocks >= 10, "calibration_blocks");
        need(ap_x.size() == ap_y.size(), "ap_y");
        need(ue_x.size() == ue_y.size(), "ue_y");
        need(ap_x.empty() || ap_x.size() == num_aps, "ap_x");
        need(ue_x.empty() || ue_x.size() == num_ues, "ue_x");
        auto in_area = [&](const std::vector<double>& v) {
            for (double c : v)
                if (!(c >= 0.0 && c < area_side))
                    return false;
            return true;
        };
        need(in_area(ap_x), "ap_x");
        need(in_area(ap_y), "ap_y");
        need(in_area(ue_x), "ue_x");
        need(in_area(ue_y), "ue_y");
    }
};

inline Scenario scenario_from_document(const ConfigDocument& doc)
{
    Scenario s;
    auto count = [&](const char* key, std::size_t& out) {
        const std::int64_t v = doc.get_int(key);
        if (v < 0)
            throw ConfigError(std::string(key) + " out of range");
        out = static_cast<std::size_t>(v);
    };
    auto required_count = [&](const char* key, std::size_t& out) {
        if (!doc.has(key))
            throw ConfigError(std::string("missing key ") + key);
        count(key, out);
    };
    auto opt_count = [&](const char* key, std::size_t& out) {
        if (doc.has(key))
            count(key, out);
    };
    auto opt_real = [&](const char* key, double& out) {
        if (doc.has(key))
            out = doc.get_double(key);
    };
    auto opt_array = [&](const char* key, std::vector<double>& out) {
        if (doc.has(key))
            out = doc.get_doubles(key);
    };

    required_count("num_aps", s.num_aps);
    required_count("antennas_per_ap", s.antennas_per_ap);
    required_count("rf_chains", s.rf_chains);
    required_count("num_ues", s.num_ues);
    required_count("pilot_len", s.pilot_len);
    opt_count("coherence", s.coherence);
    opt_real("ue_power_w", s.ue_power);
    opt_real("pilot_power_w", s.pilot_power);
    opt_real("noise_dbm", s.noise_dbm);
    opt_real("rzf_reg", s.rzf_reg);
    opt_real("serve_radius_m", s.serve_radius);
    opt_real("conv_tol", s.conv_tol);
    opt_real("area_side_m", s.area_side);
    opt_real("carrier_ghz", s.carrier_ghz);
    opt_real("ap_height_m", s.ap_height);
    opt_real("ue_height_m", s.ue_height);
    opt_real("angular_spread_deg", s.angular_spread_deg);
    opt_real("shadow_std_db", s.shadow_std_db);
    opt_real("shadow_decorr_m", s.shadow_decorr_m);
    opt_real("ap_jitter", s.ap_jitter);
    opt_count("drops", s.drops);
    opt_count("blocks", s.blocks);
    opt_count("calibration_blocks", s.calibration_blocks);
    if (doc.has("seed")) {
        const std::int64_t v = doc.get_int("seed");
        if (v < 0)
            throw ConfigError("seed out of range");
        s.seed = static_cast<std::uint64_t>(v);
    }
    if (doc.has("ap_layout")) {
        const std::string v = doc.get_string("ap_layout");
        if (v == "grid")
            s.ap_layout = ApLayout::grid;
        else if (v == "uniform")
            s.ap_layout = ApLayout::uniform;
        else
            throw ConfigError("ap_layout out of range");
    }
    if (doc.has("pilot_objective")) {
        const std::string v = doc.get_string("pilot_objective");
        if (v == "ul")
            s.pilot_objective = PilotObjective::uplink;
        else if (v == "dl")
            s.pilot_objective = PilotObjective::downlink;
        else
            throw ConfigError("pilot_objective out of range");
    }
    opt_array("ap_x", s.ap_x);
    opt_array("ap_y", s.ap_y);
    opt_array("ue_x", s.ue_x);
    opt_array("ue_y", s.ue_y);
    s.validate();
    return s;
}

inline Scenario load_scenario_text(const std::string& text)
{
    return scenario_from_document(ConfigDocument::parse(text));
}

inline Scenario load_scenario_file(const std::string& path)
{
    return scenario_from_document(ConfigDocument::load(path));
}

} // namespace cfmimo

#endif
