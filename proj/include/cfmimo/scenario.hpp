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

#ifndef CFMIMO_SCENARIO_HPP
#define CFMIMO_SCENARIO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cfmimo/config.hpp"
#include "cfmimo/core.hpp"

namespace cfmimo
{

struct Point
{
    double x = 0.0;
    double y = 0.0;
};

struct Topology
{
    std::vector<Point> aps;
    std::vector<Point> ues;
};

// Shortest displacement b - a on a square torus of the given side, taken over
// the 3x3 image grid.
inline Point wrap_displacement(const Point& a, const Point& b, double side)
{
    Point best{b.x - a.x, b.y - a.y};
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) {
            const double dx = b.x + i * side - a.x;
            const double dy = b.y + j * side - a.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = {dx, dy};
            }
        }
    return best;
}

inline double wrap_distance(const Point& a, const Point& b, double side)
{
    if (!(side > 0.0))
        throw ConfigError("area_side_m out of range");
    const Point d = wrap_displacement(a, b, side);
    return std::hypot(d.x, d.y);
}

// AP positions come from the document when given. Otherwise APs sit on a
// ceil(sqrt(M))-column grid with uniform jitter of +-jitter/2 pitch per axis
// (or uniformly at random), and UEs are uniform over the square.
inline Topology draw_topology(const Scenario& s, std::uint64_t drop_index)
{
    Topology t;
    Rng rng = make_rng(s.seed, Stream::topology, drop_index);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double side = s.area_side;
    auto wrap = [side](double v) {
        v = std::fmod(v, side);
        if (v < 0.0)
            v += side;
        return v >= side ? 0.0 : v;
    };

    if (!s.ap_x.empty()) {
        for (std::size_t m = 0; m < s.num_aps; ++m)
            t.aps.push_back({s.ap_x[m], s.ap_y[m]});
    }
    else if (s.ap_layout == ApLayout::grid) {
        const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s.num_aps))));
        const std::size_t rows = (s.num_aps + cols - 1) / cols;
        const double px = side / static_cast<double>(cols);
        const double py = side / static_cast<double>(rows);
        for (std::size_t m = 0; m < s.num_aps; ++m) {
            const double cx = (static_cast<double>(m % cols) + 0.5) * px;
            const double cy = (static_cast<double>(m / cols) + 0.5) * py;
            const double jx = (unit(rng) - 0.5) * s.ap_jitter * px;
            const double jy = (unit(rng) - 0.5) * s.ap_jitter * py;
            t.aps.push_back({wrap(cx + jx), wrap(cy + jy)});
        }
    }
    else {
        for (std::size_t m = 0; m < s.num_aps; ++m) {
            const double x = unit(rng) * side;
            const double y = unit(rng) * side;
            t.aps.push_back({wrap(x), wrap(y)});
        }
    }

    if (!s.ue_x.empty()) {
        for (std::size_t k = 0; k < s.num_ues; ++k)
            t.ues.push_back({s.ue_x[k], s.ue_y[k]});
    }
    else {
        for (std::size_t k = 0; k < s.num_ues; ++k) {
            const double x = unit(rng) * side;
            const double y = unit(rng) * side;
            t.ues.push_back({wrap(x), wrap(y)});
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Service map
// ---------------------------------------------------------------------------

class ServiceMap
{
  public:
    ServiceMap() = default;

    // Rejects masks that leave a UE without any serving AP.
    explicit ServiceMap(Grid<std::uint8_t> mask) : mask_(std::move(mask))
    {
        served_by_.assign(mask_.cols(), {});
        serves_.assign(mask_.rows(), {});
        for (std::size_t m = 0; m < mask_.rows(); ++m)
            for (std::size_t k = 0; k < mask_.cols(); ++k)
                if (mask_(m, k)) {
                    served_by_[k].push_back(m);
                    serves_[m].push_back(k);
                }
        for (std::size_t k = 0; k < mask_.cols(); ++k)
            if (served_by_[k].empty())
                throw ConfigError("uncovered UE " + std::to_string(k));
    }

    static ServiceMap full(std::size_t num_aps, std::size_t num_ues)
    {
        return ServiceMap(Grid<std::uint8_t>(num_aps, num_ues, 1));
    }

    std::size_t num_aps() const { return mask_.rows(); }
    std::size_t num_ues() const { return mask_.cols(); }
    bool serves(std::size_t m, std::size_t k) const { return mask_(m, k) != 0; }
    const Grid<std::uint8_t>& mask() const { return mask_; }

    // F_k
    const std::vector<std::size_t>& served_by(std::size_t k) const { return served_by_[k]; }
    // U_m
    const std::vector<std::size_t>& serving(std::size_t m) const { return serves_[m]; }

    // M^(s) = M (x) 1_L as an ML x K 0/1 matrix.
    RMat expanded(std::size_t L) const
    {
        RMat out = RMat::Zero(static_cast<Eigen::Index>(num_aps() * L), static_cast<Eigen::Index>(num_ues()));
        for (std::size_t m = 0; m < num_aps(); ++m)
            for (std::size_t k = 0; k < num_ues(); ++k)
                if (serves(m, k))
                    out.block(static_cast<Eigen::Index>(m * L), static_cast<Eigen::Index>(k),
                              static_cast<Eigen::Index>(L), 1)
                        .setOnes();
        return out;
    }

    // M^(i) = 1 - M^(s)
    RMat complement(std::size_t L) const
    {
        return RMat::Ones(static_cast<Eigen::Index>(num_aps() * L), static_cast<Eigen::Index>(num_ues())) -
               expanded(L);
    }

    // APs in F_k and F_i, ascending.
    std::vector<std::size_t> common_aps(std::size_t k, std::size_t i) const
    {
        std::vector<std::size_t> out;
        std::set_intersection(served_by_[k].begin(), served_by_[k].end(), served_by_[i].begin(),
                              served_by_[i].end(), std::back_inserter(out));
        return out;
    }

  private:
    Grid<std::uint8_t> mask_;
    std::vector<std::vector<std::size_t>> served_by_;
    std::vector<std::vector<std::size_t>> serves_;
};

// AP m serves UE k iff their wrap-around distance is at most R_max.
inline ServiceMap build_service_map(const Topology& t, const Scenario& s)
{
    if (t.aps.size() != s.num_aps || t.ues.size() != s.num_ues)
        throw ConfigError("topology does not match scenario");
    Grid<std::uint8_t> mask(s.num_aps, s.num_ues, 0);
    for (std::size_t m = 0; m < s.num_aps; ++m)
        for (std::size_t k = 0; k < s.num_ues; ++k)
            mask(m, k) = wrap_distance(t.aps[m], t.ues[k], s.area_side) <= s.serve_radius ? 1 : 0;
    return ServiceMap(std::move(mask));
}

} // namespace cfmimo

#endif
