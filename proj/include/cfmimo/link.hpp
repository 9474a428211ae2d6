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

#ifndef CFMIMO_LINK_HPP
#define CFMIMO_LINK_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/core.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/hybrid.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo
{

inline double spectral_efficiency(double sinr, std::size_t tau, std::size_t tau_c)
{
    return (1.0 - static_cast<double>(tau) / static_cast<double>(tau_c)) * std::log2(1.0 + sinr);
}

// ---------------------------------------------------------------------------
// Uplink
// ---------------------------------------------------------------------------

// Per-AP effective noise block
//   Sigma_m = sum_{i in U_m} p_i C_mi + sum_{i not in U_m} p_i R_mi + sigma^2 B_m^* B_m.
// It does not depend on k; Sigma_k is the block diagonal over m in F_k.
inline std::vector<CMat> effective_noise_blocks(const EstimationStats& st, const RVec& powers, const ServiceMap& svc)
{
    std::vector<CMat> out;
    for (std::size_t m = 0; m < st.num_aps(); ++m) {
        CMat S = st.noise * st.coloring[m];
        for (std::size_t i = 0; i < st.num_ues(); ++i) {
            const double p = powers(static_cast<Eigen::Index>(i));
            S += p * (svc.serves(m, i) ? st.error(m, i) : st.R(m, i));
        }
        out.push_back(hermitianize(S));
    }
    return out;
}

inline BlockDiag effective_noise_cov(const std::vector<CMat>& blocks, const ServiceMap& svc, std::size_t k)
{
    std::vector<CMat> b;
    for (std::size_t m : svc.served_by(k))
        b.push_back(blocks[m]);
    return BlockDiag(std::move(b));
}

// Stacked estimate of UE i over the APs serving UE k, zero where AP m does not
// serve i.
inline CVec stacked_estimate(const Grid<CVec>& g_hat, const ServiceMap& svc, std::size_t k, std::size_t i)
{
    const auto& F = svc.served_by(k);
    const Eigen::Index L = g_hat(0, 0).size();
    CVec a = CVec::Zero(static_cast<Eigen::Index>(F.size()) * L);
    for (std::size_t j = 0; j < F.size(); ++j)
        if (svc.serves(F[j], i))
            a.segment(static_cast<Eigen::Index>(j) * L, L) = g_hat(F[j], i);
    return a;
}

// Interference-plus-noise matrix of UE k and its stacked estimate.
inline std::pair<CMat, CVec> ul_system(const Grid<CVec>& g_hat, const std::vector<CMat>& noise_blocks,
                                       const ServiceMap& svc, const RVec& powers, std::size_t k)
{
    CMat Z = effective_noise_cov(noise_blocks, svc, k).dense();
    for (std::size_t i = 0; i < svc.num_ues(); ++i) {
        if (i == k)
            continue;
        const CVec a = stacked_estimate(g_hat, svc, k, i);
        Z.noalias() += powers(static_cast<Eigen::Index>(i)) * a * a.adjoint();
    }
    return {Z, stacked_estimate(g_hat, svc, k, k)};
}

// SINR_k = p_k g_k^* (sum_{i != k} p_i a_i a_i^* + Sigma_k)^{-1} g_k.
inline RVec ul_mmse_sinr(const Grid<CVec>& g_hat, const std::vector<CMat>& noise_blocks, const ServiceMap& svc,
                         const RVec& powers)
{
    RVec out(static_cast<Eigen::Index>(svc.num_ues()));
    for (std::size_t k = 0; k < svc.num_ues(); ++k) {
        const auto [Z, g] = ul_system(g_hat, noise_blocks, svc, powers, k);
        const CVec x = solve_hpd(Z, g);
        out(static_cast<Eigen::Index>(k)) = std::max(0.0, powers(static_cast<Eigen::Index>(k)) * g.dot(x).real());
    }
    return out;
}

// The same SINR evaluated through the explicit MMSE combiner
// v = (sum_i p_i a_i a_i^* + Sigma_k)^{-1} g_k as |v^* g|^2 p_k / v^* Z v.
inline RVec ul_mmse_sinr_combiner(const Grid<CVec>& g_hat, const std::vector<CMat>& noise_blocks,
                                  const ServiceMap& svc, const RVec& powers)
{
    RVec out(static_cast<Eigen::Index>(svc.num_ues()));
    for (std::size_t k = 0; k < svc.num_ues(); ++k) {
        const auto [Z, g] = ul_system(g_hat, noise_blocks, svc, powers, k);
        const double pk = powers(static_cast<Eigen::Index>(k));
        const CMat full = Z + pk * g * g.adjoint();
        const CVec v = solve_hpd(full, g);
        const double num = std::norm(v.dot(g)) * pk;
        const double den = v.dot(Z * v).real();
        out(static_cast<Eigen::Index>(k)) = den > 0.0 ? num / den : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Downlink RZF
// ---------------------------------------------------------------------------

// Masked estimate matrix M^(s) o G_hat, ML x K.
inline CMat masked_estimates(const Grid<CVec>& g_hat, const ServiceMap& svc)
{
    const std::size_t M = g_hat.rows();
    const std::size_t K = g_hat.cols();
    const Eigen::Index L = g_hat(0, 0).size();
    CMat A = CMat::Zero(static_cast<Eigen::Index>(M) * L, static_cast<Eigen::Index>(K));
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k)
            if (svc.serves(m, k))
                A.block(static_cast<Eigen::Index>(m) * L, static_cast<Eigen::Index>(k), L, 1) = g_hat(m, k);
    return A;
}

// Stacked true channel over all APs, ML x K.
inline CMat stacked_channels(const Grid<CVec>& g)
{
    const std::size_t M = g.rows();
    const std::size_t K = g.cols();
    const Eigen::Index L = g(0, 0).size();
    CMat G(static_cast<Eigen::Index>(M) * L, static_cast<Eigen::Index>(K));
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k)
            G.block(static_cast<Eigen::Index>(m) * L, static_cast<Eigen::Index>(k), L, 1) = g(m, k);
    return G;
}

// Unnormalized RZF directions (A A^* + reg I)^{-1} A, evaluated as
// A (A^* A + reg I)^{-1}. `reg` is the absolute regularizer (rho sigma^2).
inline CMat rzf_directions(const CMat& A, double reg)
{
    const auto K = A.cols();
    const CMat gram = A.adjoint() * A + reg * CMat::Identity(K, K);
    return A * solve_hpd(gram, CMat(CMat::Identity(K, K)));
}

// Per-column transmit power ||W v_k||^2 = v_k^* blockdiag(B_m^* B_m) v_k.
inline RVec transmit_power(const CMat& V, const std::vector<CMat>& coloring)
{
    const auto L = coloring.front().rows();
    RVec out = RVec::Zero(V.cols());
    for (Eigen::Index k = 0; k < V.cols(); ++k)
        for (std::size_t m = 0; m < coloring.size(); ++m) {
            const auto seg = V.col(k).segment(static_cast<Eigen::Index>(m) * L, L);
            out(k) += seg.dot(coloring[m] * seg).real();
        }
    return out;
}

// Everything a Monte Carlo block needs, fixed for the drop.
struct LinkContext
{
    const CorrelationSet* correlations = nullptr;
    const ServiceMap* service = nullptr;
    std::vector<CMat> chains;
    const EstimationStats* stats = nullptr;
    RVec powers;
    double noise = 0.0;
    double rzf_reg = 0.0; // absolute
    std::uint64_t seed = 0;
};

struct BlockDraw
{
    Grid<CVec> g;     // true effective channels
    Grid<CVec> g_hat; // MMSE estimates
};

// Block b of a stream: fresh channels and pilot noise.
inline BlockDraw draw_block(const LinkContext& ctx, Stream stream, std::uint64_t block)
{
    Rng rng = make_rng(ctx.seed, stream, block);
    const ChannelRealization ch = sample_channels(*ctx.correlations, rng);
    BlockDraw d;
    d.g = effective_channels(ch, ctx.chains);
    const auto Y = pilot_observations(ch, ctx.chains, ctx.stats->pilots, ctx.stats->pilot_power, ctx.noise, rng);
    d.g_hat = mmse_estimate(Y, *ctx.stats);
    return d;
}

// lambda_k = 1 / sqrt(mean ||W v_k||^2) over an independent ensemble.
inline RVec calibrate_rzf(const LinkContext& ctx, std::size_t blocks)
{
    const auto K = static_cast<Eigen::Index>(ctx.service->num_ues());
    RVec acc = RVec::Zero(K);
    for (std::size_t b = 0; b < blocks; ++b) {
        const BlockDraw d = draw_block(ctx, Stream::calibration, b);
        const CMat V = rzf_directions(masked_estimates(d.g_hat, *ctx.service), ctx.rzf_reg);
        acc += transmit_power(V, ctx.stats->coloring);
    }
    acc /= static_cast<double>(blocks);
    RVec lambda(K);
    for (Eigen::Index k = 0; k < K; ++k)
        lambda(k) = acc(k) > 0.0 ? 1.0 / std::sqrt(acc(k)) : 0.0;
    return lambda;
}

struct DownlinkResult
{
    RVec sinr;
    RVec sinr_stderr;
    RVec mean_power; // mean ||W v_k||^2 with the calibrated lambda on the evaluation ensemble
};

// SINR_k = |E a_kk|^2 p_k / (sum_{i != k} E|a_ki|^2 p_i + var(a_kk) p_k + sigma^2)
// with a_ki = g_k^* v_i, expectations replaced by sample means over `blocks`
// evaluation blocks. Standard errors by the delta method.
inline DownlinkResult dl_rzf_sinr_mc(const LinkContext& ctx, const RVec& lambda, std::size_t blocks,
                                     std::uint64_t first_block = 0)
{
    if (blocks < 10)
        throw ConfigError("blocks out of range");
    const auto K = static_cast<Eigen::Index>(ctx.service->num_ues());
    const auto n = static_cast<Eigen::Index>(blocks);
    CMat a_kk(n, K);  // desired gain per block
    RMat u_kk(n, K);  // |a_kk|^2
    RMat w_k(n, K);   // sum_{i != k} p_i |a_ki|^2
    RVec power = RVec::Zero(K);
    for (Eigen::Index b = 0; b < n; ++b) {
        const BlockDraw d = draw_block(ctx, Stream::drop, first_block + static_cast<std::uint64_t>(b));
        CMat V = rzf_directions(masked_estimates(d.g_hat, *ctx.service), ctx.rzf_reg);
        V = V * lambda.asDiagonal();
        power += transmit_power(V, ctx.stats->coloring);
        const CMat G = stacked_channels(d.g);
        const CMat Acr = G.adjoint() * V; // (k, i) = g_k^* v_i
        for (Eigen::Index k = 0; k < K; ++k) {
            a_kk(b, k) = Acr(k, k);
            u_kk(b, k) = std::norm(Acr(k, k));
            double w = 0.0;
            for (Eigen::Index i = 0; i < K; ++i)
                if (i != k)
                    w += ctx.powers(i) * std::norm(Acr(k, i));
            w_k(b, k) = w;
        }
    }
    DownlinkResult r;
    r.sinr.resize(K);
    r.sinr_stderr.resize(K);
    r.mean_power = power / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double p = ctx.powers(k);
        const cplx abar = a_kk.col(k).mean();
        const double ubar = u_kk.col(k).mean();
        const double wbar = w_k.col(k).mean();
        const double var = std::max(0.0, (ubar - std::norm(abar)) * nn / (nn - 1.0));
        const double num = std::norm(abar) * p;
        const double den = wbar + var * p + ctx.noise;
        r.sinr(k) = den > 0.0 ? num / den : 0.0;
        if (den <= 0.0 || num == 0.0) {
            r.sinr_stderr(k) = 0.0;
            continue;
        }
        // influence of each block on the ratio
        const double c_var = nn / (nn - 1.0);
        double ss = 0.0;
        for (Eigen::Index b = 0; b < n; ++b) {
            const double da = 2.0 * p * (std::conj(abar) * (a_kk(b, k) - abar)).real();
            const double dvar = c_var * ((u_kk(b, k) - ubar) - 2.0 * (std::conj(abar) * (a_kk(b, k) - abar)).real());
            const double dw = w_k(b, k) - wbar;
            const double inf = da / den - num / (den * den) * (dw + p * dvar);
            ss += inf * inf;
        }
        r.sinr_stderr(k) = std::sqrt(ss / (nn * (nn - 1.0)));
    }
    return r;
}

struct UplinkResult
{
    RVec se;        // (1 - tau/tau_c) mean log2(1 + SINR)
    RVec se_stderr;
    RVec sinr;      // mean SINR
};

inline UplinkResult ul_mmse_mc(const LinkContext& ctx, std::size_t blocks, std::size_t tau, std::size_t tau_c,
                               std::uint64_t first_block = 0)
{
    if (blocks < 2)
        throw ConfigError("blocks out of range");
    const auto K = static_cast<Eigen::Index>(ctx.service->num_ues());
    const auto noise_blocks = effective_noise_blocks(*ctx.stats, ctx.powers, *ctx.service);
    const double factor = 1.0 - static_cast<double>(tau) / static_cast<double>(tau_c);
    RMat log_rate(static_cast<Eigen::Index>(blocks), K);
    RVec sinr_sum = RVec::Zero(K);
    for (std::size_t b = 0; b < blocks; ++b) {
        const BlockDraw d = draw_block(ctx, Stream::drop, first_block + b);
        const RVec s = ul_mmse_sinr(d.g_hat, noise_blocks, *ctx.service, ctx.powers);
        sinr_sum += s;
        for (Eigen::Index k = 0; k < K; ++k)
            log_rate(static_cast<Eigen::Index>(b), k) = std::log2(1.0 + s(k));
    }
    UplinkResult r;
    const double n = static_cast<double>(blocks);
    r.sinr = sinr_sum / n;
    r.se.resize(K);
    r.se_stderr.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double mean = log_rate.col(k).mean();
        const double var = (log_rate.col(k).array() - mean).square().sum() / (n - 1.0);
        r.se(k) = factor * mean;
        r.se_stderr(k) = factor * std::sqrt(var / n);
    }
    return r;
}

} // namespace cfmimo

#endif
