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

#ifndef CFMIMO_RMT_HPP
#define CFMIMO_RMT_HPP

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cfmimo/core.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo
{

// ---------------------------------------------------------------------------
// Generic deterministic equivalents
//
// For H with independent columns of covariance R_j / n,
//   (1/n) tr D (H H^* + S + z I)^{-1}  ~  (1/n) tr D T,
//   T   = ((1/n) sum_j R_j / (1 + e_j) + S + z I)^{-1},
//   e_k = (1/n) tr R_k T.
// Mat is CMat or BlockDiag.
// ---------------------------------------------------------------------------

struct FixedPointOptions
{
    double tol = 1e-10;
    std::size_t max_iters = 500;
    std::size_t oscillation_window = 20;
};

template <class Mat>
struct FixedPointState
{
    RVec e;
    Mat T;
    std::size_t iterations = 0;
    double residual = 0.0;
    bool damped = false;
    std::vector<double> residual_trace;
};

template <class Mat>
Mat resolvent_de(const std::vector<Mat>& R, const RVec& e, const Mat& S, double z, double n)
{
    Mat A = S + z * identity_like(S);
    for (std::size_t j = 0; j < R.size(); ++j)
        A += (1.0 / (n * (1.0 + e(static_cast<Eigen::Index>(j))))) * R[j];
    return inverse_hpd(A);
}

// Starts from e_k = n. When the residual grows for `oscillation_window`
// consecutive steps, the update is relaxed by 1/2 from then on.
template <class Mat>
FixedPointState<Mat> fixed_point_e(const std::vector<Mat>& R, const Mat& S, double z, double n,
                                   const FixedPointOptions& opt = {})
{
    FixedPointState<Mat> st;
    const auto K = static_cast<Eigen::Index>(R.size());
    st.e = RVec::Constant(K, n);
    if (K == 0) {
        st.T = resolvent_de(R, st.e, S, z, n);
        return st;
    }
    double relax = 1.0;
    std::size_t rising = 0;
    double last = std::numeric_limits<double>::infinity();
    while (st.iterations < opt.max_iters) {
        const Mat T = resolvent_de(R, st.e, S, z, n);
        RVec next(K);
        for (Eigen::Index k = 0; k < K; ++k)
            next(k) = std::max(0.0, trace_product(R[static_cast<std::size_t>(k)], T).real() / n);
        next = relax * next + (1.0 - relax) * st.e;
        double res = 0.0;
        for (Eigen::Index k = 0; k < K; ++k)
            res = std::max(res, std::abs(next(k) - st.e(k)) / (1.0 + std::abs(next(k))));
        st.e = next;
        ++st.iterations;
        st.residual = res;
        st.residual_trace.push_back(res);
        if (res <= opt.tol)
            break;
        rising = res > last ? rising + 1 : 0;
        last = res;
        if (rising >= opt.oscillation_window && relax == 1.0) {
            relax = 0.5;
            st.damped = true;
            rising = 0;
        }
    }
    if (st.residual > opt.tol) {
        std::ostringstream os;
        os << "fixed point did not converge: residual " << st.residual << " after " << st.iterations
           << " iterations";
        throw NumericalError(os.str());
    }
    st.T = resolvent_de(R, st.e, S, z, n);
    return st;
}

// e'(z, Phi) = (I - J)^{-1} v with
//   J_kl = (1/n) tr(R_k T R_l T) / (n (1 + e_l)^2),  v_k = (1/n) tr(R_k T Phi T).
template <class Mat>
RMat derivative_matrix(const std::vector<Mat>& R, const FixedPointState<Mat>& st, double n)
{
    const auto K = static_cast<Eigen::Index>(R.size());
    std::vector<Mat> RT;
    for (const auto& r : R)
        RT.push_back(r * st.T);
    RMat J(K, K);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = 0; l < K; ++l)
            J(k, l) = trace_product(RT[static_cast<std::size_t>(k)], RT[static_cast<std::size_t>(l)]).real() /
                      (n * n * (1.0 + st.e(l)) * (1.0 + st.e(l)));
    return J;
}

template <class Mat>
RVec e_prime(const std::vector<Mat>& R, const FixedPointState<Mat>& st, const Mat& Phi, double n,
             const RMat* J_cached = nullptr)
{
    const auto K = static_cast<Eigen::Index>(R.size());
    if (K == 0)
        return RVec();
    const RMat J = J_cached ? *J_cached : derivative_matrix(R, st, n);
    const Mat TPT = st.T * Phi * st.T;
    RVec v(K);
    for (Eigen::Index k = 0; k < K; ++k)
        v(k) = trace_product(R[static_cast<std::size_t>(k)], TPT).real() / n;
    const RMat IJ = RMat::Identity(K, K) - J;
    Eigen::FullPivLU<RMat> lu(IJ);
    if (!lu.isInvertible())
        throw NumericalError("fixed point not contractive");
    return lu.solve(v);
}

// T'(z, Phi) = T Phi T + T ((1/n) sum_k R_k e'_k / (1 + e_k)^2) T.
template <class Mat>
Mat t_prime(const std::vector<Mat>& R, const FixedPointState<Mat>& st, const RVec& ep, const Mat& Phi, double n)
{
    Mat inner = Phi;
    for (std::size_t k = 0; k < R.size(); ++k) {
        const double ek = st.e(static_cast<Eigen::Index>(k));
        inner += (ep(static_cast<Eigen::Index>(k)) / (n * (1.0 + ek) * (1.0 + ek))) * R[k];
    }
    return hermitianize(st.T * inner * st.T);
}

// ---------------------------------------------------------------------------
// Uplink MMSE
// ---------------------------------------------------------------------------

struct UplinkDE
{
    RVec sinr;
    std::vector<std::size_t> iterations;
};

// Per UE k the resolvent lives on the |F_k| L rows of the APs serving k:
// R_i = p_i Gamma_i restricted to APs serving both, S = Sigma_k / n, z = 0.
// SINR_k = (p_k / n) tr(Gamma_k T). The desired UE is left out of the sum.
inline UplinkDE ul_sinr_asymptotic(const EstimationStats& st, const RVec& powers, const ServiceMap& svc,
                                   const std::vector<CMat>& noise_blocks, FixedPointOptions opt = {})
{
    // Near-critical loads (K close to |F_k| L) contract slowly at z = 0.
    if (opt.max_iters < 5000)
        opt.max_iters = 5000;
    const std::size_t K = svc.num_ues();
    const Eigen::Index L = st.dim();
    UplinkDE out;
    out.sinr = RVec::Zero(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
        const auto& F = svc.served_by(k);
        const double n = static_cast<double>(F.size() * static_cast<std::size_t>(L));
        std::vector<CMat> sb;
        std::vector<CMat> gk;
        for (std::size_t m : F) {
            sb.push_back(noise_blocks[m] / n);
            gk.push_back(st.gamma(m, k));
        }
        const BlockDiag S(sb);
        const BlockDiag Gk(gk);
        if (trace(Gk).real() <= 0.0) {
            out.iterations.push_back(0);
            continue;
        }
        std::vector<BlockDiag> R;
        for (std::size_t i = 0; i < K; ++i) {
            if (i == k)
                continue;
            std::vector<CMat> b;
            bool any = false;
            for (std::size_t m : F) {
                if (svc.serves(m, i)) {
                    b.push_back(powers(static_cast<Eigen::Index>(i)) * st.gamma(m, i));
                    any = true;
                }
                else {
                    b.push_back(CMat::Zero(L, L));
                }
            }
            if (any)
                R.emplace_back(std::move(b));
        }
        const auto fp = fixed_point_e(R, S, 0.0, n, opt);
        out.sinr(static_cast<Eigen::Index>(k)) =
            std::max(0.0, powers(static_cast<Eigen::Index>(k)) / n * trace_product(Gk, fp.T).real());
        out.iterations.push_back(fp.iterations);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Downlink RZF
// ---------------------------------------------------------------------------

struct DownlinkDE
{
    RVec sinr;
    RVec mu;
    RVec delta;
    RMat theta;        // theta(k, i)
    RVec lambda;       // (1 + mu) / sqrt(delta), the normalization it implies
    std::size_t iterations = 0;
};

// n = M L. T = ((1/n) sum_i Gamma_i / (1 + e_i) + (rho sigma^2 / n) I)^{-1}
// per AP block, Gamma_i masked by the service map, R_k unmasked.
inline DownlinkDE dl_sinr_asymptotic(const EstimationStats& st, const RVec& powers, const ServiceMap& svc,
                                     double reg, FixedPointOptions opt = {})
{
    const std::size_t M = st.num_aps();
    const std::size_t K = st.num_ues();
    const Eigen::Index L = st.dim();
    const double n = static_cast<double>(M * static_cast<std::size_t>(L));
    const auto Ki = static_cast<Eigen::Index>(K);
    if (opt.max_iters < 5000)
        opt.max_iters = 5000;

    std::vector<BlockDiag> G, Rfull;
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<CMat> g, r;
        for (std::size_t m = 0; m < M; ++m) {
            g.push_back(svc.serves(m, k) ? st.gamma(m, k) : CMat::Zero(L, L));
            r.push_back(st.R(m, k));
        }
        G.emplace_back(std::move(g));
        Rfull.emplace_back(std::move(r));
    }
    const BlockDiag zero = BlockDiag::zeros(M, L);
    const BlockDiag Phi(st.coloring);
    const auto fp = fixed_point_e(G, zero, reg / n, n, opt);
    const RMat J = derivative_matrix(G, fp, n);

    DownlinkDE out;
    out.iterations = fp.iterations;
    out.mu = fp.e;
    out.delta.resize(Ki);
    out.theta = RMat::Zero(Ki, Ki);
    out.sinr = RVec::Zero(Ki);
    out.lambda = RVec::Zero(Ki);

    {
        const RVec ep = e_prime(G, fp, Phi, n, &J);
        const BlockDiag Tp = t_prime(G, fp, ep, Phi, n);
        for (Eigen::Index k = 0; k < Ki; ++k)
            out.delta(k) = trace_product(G[static_cast<std::size_t>(k)], Tp).real() / (n * n);
    }
    for (Eigen::Index i = 0; i < Ki; ++i) {
        const BlockDiag& Gi = G[static_cast<std::size_t>(i)];
        const RVec ep = e_prime(G, fp, Gi, n, &J);
        const BlockDiag Tp = t_prime(G, fp, ep, Gi, n);
        for (Eigen::Index k = 0; k < Ki; ++k) {
            if (k == i)
                continue;
            const double mu = out.mu(k);
            const double first = trace_product(Rfull[static_cast<std::size_t>(k)], Tp).real() / (n * n);
            const double tki = trace_product(G[static_cast<std::size_t>(k)], Tp).real() / (n * n);
            out.theta(k, i) = first + tki * (mu * mu / ((1.0 + mu) * (1.0 + mu)) - 2.0 * mu / (1.0 + mu));
        }
    }
    for (Eigen::Index k = 0; k < Ki; ++k) {
        const double mu = out.mu(k);
        const double dk = out.delta(k);
        if (mu <= 0.0) {
            out.sinr(k) = 0.0;
            continue;
        }
        if (!(dk > 0.0)) {
            std::ostringstream os;
            os << "non-positive delta for UE " << k << ": mu " << mu << ", delta " << dk;
            throw NumericalError(os.str());
        }
        out.lambda(k) = (1.0 + mu) / std::sqrt(dk);
        double den = st.noise;
        for (Eigen::Index i = 0; i < Ki; ++i)
            if (i != k && out.delta(i) > 0.0)
                den += out.theta(k, i) / out.delta(i) * powers(i);
        out.sinr(k) = std::max(0.0, mu * mu / dk * powers(k) / den);
    }
    return out;
}

} // namespace cfmimo

#endif
