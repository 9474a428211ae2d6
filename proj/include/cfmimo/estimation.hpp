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

#ifndef CFMIMO_ESTIMATION_HPP
#define CFMIMO_ESTIMATION_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/core.hpp"
#include "cfmimo/hybrid.hpp"
#include "cfmimo/linalg.hpp"

namespace cfmimo
{

// ---------------------------------------------------------------------------
// Pilot book
//
// The pilot set is the tau x tau DFT matrix scaled by sqrt(tau):
// phi_p[t] = exp(-j 2 pi t p / tau), so ||phi_p||^2 = tau.
// ---------------------------------------------------------------------------

struct PilotBook
{
    std::size_t tau = 1;
    std::vector<std::size_t> assignment; // UE -> pilot index

    PilotBook() = default;
    PilotBook(std::size_t tau_, std::vector<std::size_t> assign) : tau(tau_), assignment(std::move(assign))
    {
        for (std::size_t p : assignment)
            if (p >= tau)
                throw ConfigError("pilot index out of range");
    }

    // UE k gets pilot k mod tau.
    static PilotBook round_robin(std::size_t tau, std::size_t K)
    {
        std::vector<std::size_t> a(K);
        for (std::size_t k = 0; k < K; ++k)
            a[k] = k % tau;
        return PilotBook(tau, std::move(a));
    }

    std::size_t num_ues() const { return assignment.size(); }

    CVec sequence(std::size_t p) const
    {
        CVec phi(static_cast<Eigen::Index>(tau));
        for (std::size_t t = 0; t < tau; ++t)
            phi(static_cast<Eigen::Index>(t)) =
                std::polar(1.0, -2.0 * pi * static_cast<double>(t * p) / static_cast<double>(tau));
        return phi;
    }

    // Phi, tau x K
    CMat matrix() const
    {
        CMat out(static_cast<Eigen::Index>(tau), static_cast<Eigen::Index>(num_ues()));
        for (std::size_t k = 0; k < num_ues(); ++k)
            out.col(static_cast<Eigen::Index>(k)) = sequence(assignment[k]);
        return out;
    }

    std::vector<std::size_t> group(std::size_t p) const
    {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < num_ues(); ++k)
            if (assignment[k] == p)
                out.push_back(k);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Estimation statistics
//
// With orthogonal pilots the tau L x tau L system decouples per pilot. For
// pilot p at AP m,
//   Q_{m,p}   = tau p_t sum_{i uses p} R_{m,i} + sigma^2 B_m^* B_m,
//   Gamma_mk  = tau p_t R_mk Q^{-1} R_mk,   C_mk = R_mk - Gamma_mk,
//   g_hat_mk  = sqrt(p_t) R_mk Q^{-1} (Y_m conj(phi_k)).
// ---------------------------------------------------------------------------

struct EstimationStats
{
    Grid<CMat> R;               // effective correlations
    std::vector<CMat> coloring; // B_m^* B_m
    Grid<CMat> gamma;
    Grid<CMat> error;
    Grid<CMat> estimator;       // sqrt(p_t) R Q^{-1}
    PilotBook pilots;
    double pilot_power = 0.0;
    double noise = 0.0;
    std::vector<std::string> warnings;

    std::size_t num_aps() const { return R.rows(); }
    std::size_t num_ues() const { return R.cols(); }
    Eigen::Index dim() const { return R.size() ? R(0, 0).rows() : 0; }
};

namespace detail
{

inline void estimate_group(EstimationStats& st, std::size_t m, std::size_t p, const std::vector<std::size_t>& ues)
{
    const Eigen::Index L = st.dim();
    const double tau = static_cast<double>(st.pilots.tau);
    CMat Q = st.noise * st.coloring[m];
    for (std::size_t i : ues)
        Q += tau * st.pilot_power * st.R(m, i);
    Q = hermitianize(Q);
    if (condition_number_hpd(Q) > 1e12) {
        st.warnings.push_back("AP " + std::to_string(m) + ", pilot " + std::to_string(p) +
                              ": ill-conditioned pilot covariance, regularized");
        Q += 1e-12 * std::abs(Q.trace().real()) / static_cast<double>(L) * CMat::Identity(L, L);
    }
    Eigen::LDLT<CMat> ldlt(Q);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("pilot covariance factorization failed");
    for (std::size_t k : ues) {
        const CMat& Rk = st.R(m, k);
        const CMat X = ldlt.solve(Rk); // Q^{-1} R
        st.estimator(m, k) = std::sqrt(st.pilot_power) * X.adjoint();
        st.gamma(m, k) = hermitianize(tau * st.pilot_power * Rk * X);
        st.error(m, k) = hermitianize(Rk - st.gamma(m, k));
    }
}

} // namespace detail

inline EstimationStats estimation_statistics(const EffectiveCorrelations& eff, const PilotBook& book,
                                             double pilot_power, double noise)
{
    if (book.num_ues() != eff.R.cols())
        throw ConfigError("pilot book does not match the number of UEs");
    EstimationStats st;
    st.R = eff.R;
    st.coloring = eff.coloring;
    st.pilots = book;
    st.pilot_power = pilot_power;
    st.noise = noise;
    const std::size_t M = eff.R.rows();
    const std::size_t K = eff.R.cols();
    st.gamma = Grid<CMat>(M, K);
    st.error = Grid<CMat>(M, K);
    st.estimator = Grid<CMat>(M, K);
    std::vector<std::vector<std::size_t>> groups(book.tau);
    for (std::size_t k = 0; k < K; ++k)
        groups[book.assignment[k]].push_back(k);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t p = 0; p < book.tau; ++p)
            if (!groups[p].empty())
                detail::estimate_group(st, m, p, groups[p]);
    return st;
}

// Re-estimates only the UEs whose pilot group changed between `base` and
// `book`, reusing everything else.
inline EstimationStats update_estimation_statistics(const EstimationStats& base, const PilotBook& book,
                                                    const std::vector<std::size_t>& changed_pilots)
{
    EstimationStats st = base;
    st.pilots = book;
    st.warnings.clear();
    for (std::size_t p : changed_pilots) {
        const auto ues = book.group(p);
        if (ues.empty())
            continue;
        for (std::size_t m = 0; m < st.num_aps(); ++m)
            detail::estimate_group(st, m, p, ues);
    }
    return st;
}

// Y_m = sqrt(p_t) G_m Phi^T + B_m^* Z_m with Z_m ~ CN(0, sigma^2 I_N), L x tau.
inline std::vector<CMat> pilot_observations(const ChannelRealization& ch, const std::vector<CMat>& chains,
                                            const PilotBook& book, double pilot_power, double noise, Rng& rng)
{
    const std::size_t M = ch.h.rows();
    const std::size_t K = ch.h.cols();
    const CMat Phi = book.matrix();
    const auto tau = static_cast<Eigen::Index>(book.tau);
    std::vector<CMat> Y(M);
    for (std::size_t m = 0; m < M; ++m) {
        const CMat& B = chains[m];
        const Eigen::Index N = B.rows();
        CMat H(N, static_cast<Eigen::Index>(K));
        for (std::size_t k = 0; k < K; ++k)
            H.col(static_cast<Eigen::Index>(k)) = ch.h(m, k);
        const CMat Z = std::sqrt(noise) * complex_normal(rng, N, tau);
        Y[m] = B.adjoint() * (std::sqrt(pilot_power) * H * Phi.transpose() + Z);
    }
    return Y;
}

inline Grid<CVec> mmse_estimate(const std::vector<CMat>& Y, const EstimationStats& st)
{
    Grid<CVec> g(st.num_aps(), st.num_ues());
    std::vector<CVec> conj_seq(st.pilots.tau);
    for (std::size_t p = 0; p < st.pilots.tau; ++p)
        conj_seq[p] = st.pilots.sequence(p).conjugate();
    for (std::size_t m = 0; m < st.num_aps(); ++m) {
        std::vector<CVec> y(st.pilots.tau);
        for (std::size_t k = 0; k < st.num_ues(); ++k) {
            const std::size_t p = st.pilots.assignment[k];
            if (y[p].size() == 0)
                y[p] = Y[m] * conj_seq[p];
            g(m, k) = st.estimator(m, k) * y[p];
        }
    }
    return g;
}

} // namespace cfmimo

#endif
