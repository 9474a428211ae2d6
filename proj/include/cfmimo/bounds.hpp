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

#ifndef CFMIMO_BOUNDS_HPP
#define CFMIMO_BOUNDS_HPP

#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/core.hpp"

namespace cfmimo
{

// Perfect-CSI MRC SINR for M -> infinity: (p / sigma^2) sum_m tr(W_m^* R_mk W_m).
// Pass identity chains for the fully digital value.
inline RVec mrc_asymptotic_sinr(const CorrelationSet& cs, const std::vector<CMat>& chains, double p, double noise)
{
    RVec out = RVec::Zero(static_cast<Eigen::Index>(cs.num_ues()));
    for (std::size_t k = 0; k < cs.num_ues(); ++k)
        for (std::size_t m = 0; m < cs.num_aps(); ++m)
            out(static_cast<Eigen::Index>(k)) += (chains[m].adjoint() * cs.R(m, k) * chains[m]).trace().real();
    return out * (p / noise);
}

inline RVec mrc_digital_sinr(const CorrelationSet& cs, double p, double noise)
{
    RVec out = RVec::Zero(static_cast<Eigen::Index>(cs.num_ues()));
    for (std::size_t k = 0; k < cs.num_ues(); ++k)
        for (std::size_t m = 0; m < cs.num_aps(); ++m)
            out(static_cast<Eigen::Index>(k)) += cs.R(m, k).trace().real();
    return out * (p / noise);
}

struct GapBounds
{
    RVec lower;
    RVec upper;
};

// Bounds on digital-minus-hybrid MRC SINR for any semi-unitary N x L analog
// stage, from Cauchy interlacing (eigenvalues descending):
//   lower = (p/sigma^2) sum_m sum_{n>L} lambda_n
//   upper = (p/sigma^2) sum_m [ sum_{n<=L} (lambda_n - lambda_{N-L+n}) + sum_{n>L} lambda_n ]
inline GapBounds gap_bounds(const CorrelationSet& cs, std::size_t L, double p, double noise)
{
    const auto K = static_cast<Eigen::Index>(cs.num_ues());
    const Eigen::Index N = cs.antennas();
    const auto Li = static_cast<Eigen::Index>(L);
    GapBounds g{RVec::Zero(K), RVec::Zero(K)};
    for (std::size_t k = 0; k < cs.num_ues(); ++k)
        for (std::size_t m = 0; m < cs.num_aps(); ++m) {
            const RVec& lam = cs.eigenvalues(m, k);
            double tail = 0.0, spread = 0.0;
            for (Eigen::Index n = Li; n < N; ++n)
                tail += lam(n);
            for (Eigen::Index n = 0; n < Li; ++n)
                spread += lam(n) - lam(N - Li + n);
            g.lower(static_cast<Eigen::Index>(k)) += tail;
            g.upper(static_cast<Eigen::Index>(k)) += spread + tail;
        }
    g.lower *= p / noise;
    g.upper *= p / noise;
    return g;
}

// Interference-to-noise ratio seen by perfect-CSI digital MRC at finite M:
// sum_{i != k} p tr(R_k R_i) / (sigma^2 tr R_k). It vanishes relative to the
// signal only as M grows.
inline RVec mrc_residual_interference(const CorrelationSet& cs, double p, double noise)
{
    const auto K = static_cast<Eigen::Index>(cs.num_ues());
    RVec out = RVec::Zero(K);
    for (std::size_t k = 0; k < cs.num_ues(); ++k) {
        double inter = 0.0, sig = 0.0;
        for (std::size_t m = 0; m < cs.num_aps(); ++m) {
            sig += cs.R(m, k).trace().real();
            for (std::size_t i = 0; i < cs.num_ues(); ++i)
                if (i != k)
                    inter += (cs.R(m, k) * cs.R(m, i)).trace().real();
        }
        out(static_cast<Eigen::Index>(k)) = sig > 0.0 ? p * inter / (noise * sig) : 0.0;
    }
    return out;
}

} // namespace cfmimo

#endif
