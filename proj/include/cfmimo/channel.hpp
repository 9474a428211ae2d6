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

#ifndef CFMIMO_CHANNEL_HPP
#define CFMIMO_CHANNEL_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cfmimo/config.hpp"
#include "cfmimo/core.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo
{

// ---------------------------------------------------------------------------
// Large-scale fading
// ---------------------------------------------------------------------------

// Urban-microcell NLOS pathloss in dB. Distances below 1 m are clamped.
inline double pathloss_db(double d, double carrier_ghz)
{
    d = std::max(d, 1.0);
    return 36.7 * std::log10(d) + 22.7 + 26.0 * std::log10(carrier_ghz);
}

inline double large_scale_gain(double d, double carrier_ghz)
{
    return std::pow(10.0, -pathloss_db(d, carrier_ghz) / 10.0);
}

// Per-AP shadowing in dB. For each AP the K-vector is N(0, C) with
// C(k, k') = sigma^2 exp(-d(k, k') / d_corr) over UE-UE wrap distances;
// APs are independent.
inline RMat correlated_shadowing(const Topology& t, double sigma_db, double decorr_m, double side, Rng& rng)
{
    const auto M = static_cast<Eigen::Index>(t.aps.size());
    const auto K = static_cast<Eigen::Index>(t.ues.size());
    RMat out = RMat::Zero(M, K);
    if (sigma_db == 0.0 || K == 0)
        return out;

    RMat cov(K, K);
    for (Eigen::Index a = 0; a < K; ++a)
        for (Eigen::Index b = 0; b < K; ++b)
            cov(a, b) = sigma_db * sigma_db *
                        std::exp(-wrap_distance(t.ues[static_cast<std::size_t>(a)], t.ues[static_cast<std::size_t>(b)], side) /
                                 decorr_m);
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (cov + cov.transpose()));
    if (es.info() != Eigen::Success)
        throw NumericalError("shadowing covariance eigendecomposition failed");
    RVec ev = es.eigenvalues();
    const double tol = 1e-10 * ev.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < K; ++i) {
        if (ev(i) < -tol)
            throw NumericalError("shadowing covariance is not positive semidefinite");
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    const RMat factor = es.eigenvectors() * ev.asDiagonal();

    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index m = 0; m < M; ++m) {
        RVec w(K);
        for (Eigen::Index i = 0; i < K; ++i)
            w(i) = normal(rng);
        out.row(m) = (factor * w).transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial correlation
//
// Local scattering around a nominal angle theta with a Gaussian angular
// spread, half-wavelength ULA. For small spreads the entry is
//   beta exp(j pi (a-b) sin theta) exp(-sigma^2 pi^2 (a-b)^2 cos^2 theta / 2).
// ---------------------------------------------------------------------------

inline CMat spatial_correlation(double beta, double theta, double spread, Eigen::Index N, bool iid = false)
{
    if (iid)
        return beta * CMat::Identity(N, N);
    CMat R(N, N);
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b < N; ++b) {
            const double d = static_cast<double>(a - b);
            const double mag = std::exp(-spread * spread * pi * pi * d * d * c * c / 2.0);
            R(a, b) = beta * mag * std::polar(1.0, pi * d * s);
        }
    return R;
}

// R_{m,k} for every AP/UE pair together with cached eigendecompositions.
class CorrelationSet
{
  public:
    CorrelationSet() = default;

    explicit CorrelationSet(Grid<CMat> R) : R_(std::move(R)), eig_(R_.rows(), R_.cols()), factor_(R_.rows(), R_.cols())
    {
        for (std::size_t m = 0; m < R_.rows(); ++m)
            for (std::size_t k = 0; k < R_.cols(); ++k) {
                R_(m, k) = hermitianize(R_(m, k));
                eig_(m, k) = eig_hermitian_desc(R_(m, k), true, 1e-12);
                factor_(m, k) = eig_(m, k).vectors * eig_(m, k).values.cwiseSqrt().asDiagonal();
            }
    }

    std::size_t num_aps() const { return R_.rows(); }
    std::size_t num_ues() const { return R_.cols(); }
    Eigen::Index antennas() const { return R_.size() ? R_(0, 0).rows() : 0; }

    const CMat& R(std::size_t m, std::size_t k) const { return R_(m, k); }
    const RVec& eigenvalues(std::size_t m, std::size_t k) const { return eig_(m, k).values; }
    const CMat& eigenvectors(std::size_t m, std::size_t k) const { return eig_(m, k).vectors; }
    // V Lambda^{1/2}, so that h = factor * w with w ~ CN(0, I).
    const CMat& factor(std::size_t m, std::size_t k) const { return factor_(m, k); }
    const Grid<CMat>& matrices() const { return R_; }

  private:
    Grid<CMat> R_;
    Grid<HermitianEigen> eig_;
    Grid<CMat> factor_;
};

// True channels h_{m,k} for one coherence block.
struct ChannelRealization
{
    Grid<CVec> h;
};

inline ChannelRealization sample_channels(const CorrelationSet& cs, Rng& rng)
{
    ChannelRealization out;
    out.h = Grid<CVec>(cs.num_aps(), cs.num_ues());
    const Eigen::Index N = cs.antennas();
    for (std::size_t m = 0; m < cs.num_aps(); ++m)
        for (std::size_t k = 0; k < cs.num_ues(); ++k)
            out.h(m, k) = cs.factor(m, k) * complex_normal(rng, N);
    return out;
}

inline ChannelRealization sample_channels(const CorrelationSet& cs, std::uint64_t seed, std::uint64_t block)
{
    Rng rng = make_rng(seed, Stream::channel, block);
    return sample_channels(cs, rng);
}

// ---------------------------------------------------------------------------
// Drop: one random network realization with its slow-fading statistics.
// ---------------------------------------------------------------------------

struct Drop
{
    Topology topology;
    ServiceMap service;
    RMat gain;       // linear beta_{m,k}, shadowing included
    RMat shadow_db;  // shadowing offsets
    CorrelationSet correlations;
};

inline Drop generate_drop(const Scenario& s, std::uint64_t drop_index)
{
    Drop d;
    d.topology = draw_topology(s, drop_index);
    d.service = build_service_map(d.topology, s);
    Rng shadow_rng = make_rng(s.seed, Stream::shadowing, drop_index);
    d.shadow_db = correlated_shadowing(d.topology, s.shadow_std_db, s.shadow_decorr_m, s.area_side, shadow_rng);
    const auto M = s.num_aps;
    const auto K = s.num_ues;
    const double dh = s.ap_height - s.ue_height;
    d.gain = RMat::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(K));
    Grid<CMat> R(M, K);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) {
            const Point disp = wrap_displacement(d.topology.aps[m], d.topology.ues[k], s.area_side);
            const double dist = std::sqrt(disp.x * disp.x + disp.y * disp.y + dh * dh);
            const auto mi = static_cast<Eigen::Index>(m);
            const auto ki = static_cast<Eigen::Index>(k);
            d.gain(mi, ki) = std::pow(10.0, (-pathloss_db(dist, s.carrier_ghz) + d.shadow_db(mi, ki)) / 10.0);
            const double theta = std::atan2(disp.y, disp.x);
            R(m, k) = spatial_correlation(d.gain(mi, ki), theta, s.angular_spread_rad(),
                                          static_cast<Eigen::Index>(s.antennas_per_ap), s.iid_fading());
        }
    d.correlations = CorrelationSet(std::move(R));
    return d;
}

// ---------------------------------------------------------------------------
// CSV bundle: ap,ue,row,col,re,im
// ---------------------------------------------------------------------------

inline void write_correlation_csv(std::ostream& os, const CorrelationSet& cs)
{
    os << "ap,ue,row,col,re,im\n" << std::setprecision(17);
    for (std::size_t m = 0; m < cs.num_aps(); ++m)
        for (std::size_t k = 0; k < cs.num_ues(); ++k) {
            const CMat& R = cs.R(m, k);
            for (Eigen::Index r = 0; r < R.rows(); ++r)
                for (Eigen::Index c = 0; c < R.cols(); ++c)
                    os << m << ',' << k << ',' << r << ',' << c << ',' << R(r, c).real() << ',' << R(r, c).imag()
                       << '\n';
        }
}

inline CorrelationSet read_correlation_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("ap,ue,row,col,re,im", 0) != 0)
        throw ConfigError("correlation bundle: bad header");
    struct Entry
    {
        std::size_t m, k;
        Eigen::Index r, c;
        cplx v;
    };
    std::vector<Entry> entries;
    std::size_t M = 0, K = 0;
    Eigen::Index N = 0;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string f[6];
        for (auto& x : f)
            if (!std::getline(ss, x, ','))
                throw ConfigError("correlation bundle: short row");
        try {
            Entry e{std::stoul(f[0]), std::stoul(f[1]), std::stol(f[2]), std::stol(f[3]),
                    cplx(std::stod(f[4]), std::stod(f[5]))};
            M = std::max(M, e.m + 1);
            K = std::max(K, e.k + 1);
            N = std::max({N, e.r + 1, e.c + 1});
            entries.push_back(e);
        }
        catch (const std::logic_error&) {
            throw ConfigError("correlation bundle: bad number");
        }
    }
    Grid<CMat> R(M, K, CMat::Zero(N, N));
    for (const auto& e : entries)
        R(e.m, e.k)(e.r, e.c) = e.v;
    return CorrelationSet(std::move(R));
}

} // namespace cfmimo

#endif
