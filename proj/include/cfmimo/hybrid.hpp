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

#ifndef CFMIMO_HYBRID_HPP
#define CFMIMO_HYBRID_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/core.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo
{

// ---------------------------------------------------------------------------
// Eigenmode scheduling
// ---------------------------------------------------------------------------

struct Mode
{
    std::size_t ap = 0;
    std::size_t ue = 0;
    Eigen::Index index = 0; // eigenvalue rank, 0 = largest
    double lambda = 0.0;

    auto key() const { return std::make_tuple(ap, ue, index); }
};

struct EigenSchedule
{
    std::vector<Mode> selected; // in (ap, ue, index) order
    RVec signal;                // S_k
    double min_signal() const { return signal.size() ? signal.minCoeff() : 0.0; }

    bool is_selected(std::size_t m, std::size_t k, Eigen::Index n) const
    {
        for (const auto& md : selected)
            if (md.ap == m && md.ue == k && md.index == n)
                return true;
        return false;
    }

    std::vector<Mode> at_ap(std::size_t m) const
    {
        std::vector<Mode> out;
        for (const auto& md : selected)
            if (md.ap == m)
                out.push_back(md);
        return out;
    }
};

// Max-min eigenmode scheduling by reverse deletion. Every mode (m, k in U_m, n)
// starts selected; while some AP holds more than L modes, the mode at an
// overloaded AP whose removal leaves min_k S_k largest is deleted. Ties go to
// the smaller eigenvalue, then to the lowest (m, k, n).
inline EigenSchedule schedule_eigenmodes(const CorrelationSet& cs, const ServiceMap& svc, std::size_t L)
{
    const std::size_t M = cs.num_aps();
    const std::size_t K = cs.num_ues();
    const Eigen::Index N = cs.antennas();

    std::vector<Mode> modes;
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k : svc.serving(m))
            for (Eigen::Index n = 0; n < N; ++n)
                modes.push_back({m, k, n, cs.eigenvalues(m, k)(n)});
    std::vector<char> alive(modes.size(), 1);
    std::vector<std::size_t> load(M, 0);
    RVec S = RVec::Zero(static_cast<Eigen::Index>(K));
    for (const auto& md : modes) {
        ++load[md.ap];
        S(static_cast<Eigen::Index>(md.ue)) += md.lambda;
    }
    const double scale = std::max(S.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double tie = 1e-12 * scale;

    for (;;) {
        // smallest and second smallest S
        Eigen::Index arg1 = -1;
        double s1 = std::numeric_limits<double>::infinity(), s2 = s1;
        for (Eigen::Index k = 0; k < S.size(); ++k) {
            if (S(k) < s1) {
                s2 = s1;
                s1 = S(k);
                arg1 = k;
            }
            else if (S(k) < s2) {
                s2 = S(k);
            }
        }
        std::size_t best = modes.size();
        double best_min = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < modes.size(); ++i) {
            if (!alive[i] || load[modes[i].ap] <= L)
                continue;
            const auto k = static_cast<Eigen::Index>(modes[i].ue);
            const double others = (k == arg1) ? s2 : s1;
            const double after = std::min(S(k) - modes[i].lambda, others);
            bool better = false;
            if (best == modes.size() || after > best_min + tie)
                better = true;
            else if (after >= best_min - tie) {
                if (modes[i].lambda < modes[best].lambda)
                    better = true;
                // equal eigenvalue keeps the earlier (lower) index
            }
            if (better) {
                best = i;
                best_min = after;
            }
        }
        if (best == modes.size())
            break;
        alive[best] = 0;
        --load[modes[best].ap];
        S(static_cast<Eigen::Index>(modes[best].ue)) -= modes[best].lambda;
    }

    EigenSchedule out;
    out.signal = RVec::Zero(static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < modes.size(); ++i)
        if (alive[i]) {
            out.selected.push_back(modes[i]);
            out.signal(static_cast<Eigen::Index>(modes[i].ue)) += modes[i].lambda;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Analog stage
// ---------------------------------------------------------------------------

// Orthonormal W^(p) for AP m. Candidate columns are tried in order:
// scheduled eigenvectors (by eigenvalue), unscheduled eigenvectors of served
// UEs, eigenvectors of the remaining UEs, then the standard basis. A column is
// kept only if it raises the rank.
inline CMat assemble_unconstrained(const EigenSchedule& sched, const CorrelationSet& cs, const ServiceMap& svc,
                                   std::size_t m, std::size_t L, std::vector<std::string>* warnings = nullptr)
{
    const Eigen::Index N = cs.antennas();
    std::vector<Mode> chosen = sched.at_ap(m);
    std::stable_sort(chosen.begin(), chosen.end(), [](const Mode& a, const Mode& b) { return a.lambda > b.lambda; });

    auto by_eigenvalue = [&](const std::vector<std::size_t>& ues) {
        std::vector<Mode> pool;
        for (std::size_t k : ues)
            for (Eigen::Index n = 0; n < N; ++n)
                if (!sched.is_selected(m, k, n))
                    pool.push_back({m, k, n, cs.eigenvalues(m, k)(n)});
        std::stable_sort(pool.begin(), pool.end(), [](const Mode& a, const Mode& b) { return a.lambda > b.lambda; });
        return pool;
    };
    std::vector<std::size_t> others;
    for (std::size_t k = 0; k < cs.num_ues(); ++k)
        if (!svc.serves(m, k))
            others.push_back(k);
    std::vector<Mode> pad_served = by_eigenvalue(svc.serving(m));
    std::vector<Mode> pad_other = by_eigenvalue(others);

    const auto total = static_cast<Eigen::Index>(chosen.size() + pad_served.size() + pad_other.size()) + N;
    CMat cand(N, total);
    Eigen::Index c = 0;
    for (const auto* list : {&chosen, &pad_served, &pad_other})
        for (const auto& md : *list)
            cand.col(c++) = cs.eigenvectors(md.ap, md.ue).col(md.index);
    cand.rightCols(N) = CMat::Identity(N, N);

    const OrthonormalBasis ob = orthonormalize_columns(cand, static_cast<Eigen::Index>(L));
    if (ob.basis.cols() < static_cast<Eigen::Index>(L))
        throw NumericalError("analog basis assembly failed");
    if (warnings) {
        for (Eigen::Index r : ob.rejected)
            if (r < static_cast<Eigen::Index>(chosen.size()))
                warnings->push_back("AP " + std::to_string(m) + ": scheduled mode (ue " +
                                    std::to_string(chosen[static_cast<std::size_t>(r)].ue) + ", n " +
                                    std::to_string(chosen[static_cast<std::size_t>(r)].index) +
                                    ") is linearly dependent and was replaced");
    }
    return ob.basis;
}

struct PhaseResult
{
    CMat W_hat;
    CMat A;
    std::size_t iterations = 0;
    bool converged = false;
    bool rank_guard = false;       // stopped early to keep W_hat full rank
    std::vector<double> objective; // after every half step
};

// sigma_min / sigma_max below which an iterate counts as collapsing.
inline constexpr double phase_rank_guard = 1e-6;

inline double relative_sigma_min(const CMat& X)
{
    const RVec d = Eigen::JacobiSVD<CMat>(X).singularValues();
    return d.size() == 0 || d(0) <= 0.0 ? 0.0 : d(d.size() - 1) / d(0);
}

// Phase-only approximation of an orthonormal W^(p) by alternating
// minimization of ||W_hat - W^(p) A||_F^2 over A and over unit-modulus/sqrt(N)
// W_hat. One iteration is one A update followed by one W_hat update.
inline PhaseResult constrain_phase_alternating(const CMat& Wp, double eps, std::size_t max_iters = 500)
{
    const Eigen::Index N = Wp.rows();
    const double amp = 1.0 / std::sqrt(static_cast<double>(N));
    PhaseResult r;
    CMat phase = CMat::Ones(Wp.rows(), Wp.cols()); // unit phasors
    auto project = [&](const CMat& X) {
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = 0; j < X.cols(); ++j)
                if (std::abs(X(i, j)) > 0.0)
                    phase(i, j) = X(i, j) / std::abs(X(i, j));
        return CMat(amp * phase);
    };
    r.W_hat = project(Wp);
    double prev = std::numeric_limits<double>::infinity();
    while (r.iterations < max_iters) {
        r.A = Wp.adjoint() * r.W_hat;
        r.objective.push_back((r.W_hat - Wp * r.A).squaredNorm());
        const CMat keep = phase;
        const CMat next = project(Wp * r.A);
        // The objective only measures distance to span(W^(p)) and is blind to
        // columns merging; stop on the last iterate that is still full rank.
        if (relative_sigma_min(next) < phase_rank_guard && relative_sigma_min(r.W_hat) >= phase_rank_guard) {
            phase = keep;
            r.objective.pop_back();
            r.rank_guard = true;
            break;
        }
        const double obj = (next - Wp * r.A).squaredNorm();
        r.objective.push_back(obj);
        r.W_hat = next;
        ++r.iterations;
        if (obj <= 1e-24 * static_cast<double>(Wp.cols()) || (std::isfinite(prev) && (prev - obj) < eps * prev)) {
            r.converged = true;
            break;
        }
        prev = obj;
    }
    if (r.converged || r.rank_guard)
        r.A = Wp.adjoint() * r.W_hat;
    return r;
}

// F = V D^{-1} V^* from the thin SVD W_hat = U D V^*, so W_hat F = U V^* has
// orthonormal columns.
inline CMat compensation_matrix(const CMat& W_hat)
{
    Eigen::JacobiSVD<CMat> svd(W_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVec& d = svd.singularValues();
    if (d.size() < W_hat.cols() || d.minCoeff() <= 1e-10)
        throw NumericalError("compensation undefined");
    const CMat& V = svd.matrixV();
    return hermitianize(V * d.cwiseInverse().asDiagonal() * V.adjoint());
}

enum class AnalogMethod
{
    proposed,
    svd,
    digital
};

inline const char* to_string(AnalogMethod m)
{
    switch (m) {
    case AnalogMethod::proposed: return "proposed";
    case AnalogMethod::svd: return "svd";
    case AnalogMethod::digital: return "digital";
    }
    return "?";
}

inline AnalogMethod parse_analog_method(const std::string& s)
{
    if (s == "proposed")
        return AnalogMethod::proposed;
    if (s == "svd")
        return AnalogMethod::svd;
    if (s == "digital")
        return AnalogMethod::digital;
    throw ConfigError("analog out of range");
}

struct ApDesign
{
    CMat W_p;   // orthonormal target
    CMat W_hat; // phase constrained
    CMat A;
    CMat F;     // compensation
    std::size_t iterations = 0;
    bool converged = true;
    bool rank_guard = false;
};

struct HybridDesign
{
    AnalogMethod method = AnalogMethod::proposed;
    std::vector<ApDesign> aps;
    EigenSchedule schedule;
    std::vector<std::string> warnings;

    std::size_t rf_chains() const { return aps.empty() ? 0 : static_cast<std::size_t>(aps.front().F.cols()); }

    // Effective analog chains W_hat_m F_m, one N x L matrix per AP.
    std::vector<CMat> chains() const
    {
        std::vector<CMat> out;
        out.reserve(aps.size());
        for (const auto& a : aps)
            out.push_back(a.W_hat * a.F);
        return out;
    }
};

inline ApDesign finish_ap_design(CMat W_p, double eps, std::size_t max_iters)
{
    ApDesign d;
    d.W_p = std::move(W_p);
    PhaseResult pr = constrain_phase_alternating(d.W_p, eps, max_iters);
    d.W_hat = std::move(pr.W_hat);
    d.A = std::move(pr.A);
    d.iterations = pr.iterations;
    d.converged = pr.converged;
    d.rank_guard = pr.rank_guard;
    d.F = compensation_matrix(d.W_hat);
    return d;
}

inline HybridDesign digital_design(std::size_t num_aps, Eigen::Index N)
{
    HybridDesign h;
    h.method = AnalogMethod::digital;
    for (std::size_t m = 0; m < num_aps; ++m) {
        ApDesign d;
        d.W_p = d.W_hat = d.A = d.F = CMat::Identity(N, N);
        h.aps.push_back(d);
    }
    return h;
}

inline HybridDesign proposed_design(const CorrelationSet& cs, const ServiceMap& svc, std::size_t L, double eps,
                                    std::size_t max_iters = 500)
{
    HybridDesign h;
    h.method = AnalogMethod::proposed;
    h.schedule = schedule_eigenmodes(cs, svc, L);
    for (std::size_t m = 0; m < cs.num_aps(); ++m) {
        ApDesign d = finish_ap_design(assemble_unconstrained(h.schedule, cs, svc, m, L, &h.warnings), eps, max_iters);
        if (d.rank_guard)
            h.warnings.push_back("AP " + std::to_string(m) + ": phase constraint stopped before rank loss");
        else if (!d.converged)
            h.warnings.push_back("AP " + std::to_string(m) + ": phase constraint did not converge");
        h.aps.push_back(std::move(d));
    }
    return h;
}

// Per AP, the top-L eigenvectors of the summed covariance of the served UEs
// (all UEs when the AP serves none), then the same constraint and compensation.
inline HybridDesign baseline_svd_design(const CorrelationSet& cs, const ServiceMap& svc, std::size_t L, double eps,
                                        std::size_t max_iters = 500)
{
    HybridDesign h;
    h.method = AnalogMethod::svd;
    const Eigen::Index N = cs.antennas();
    for (std::size_t m = 0; m < cs.num_aps(); ++m) {
        CMat sum = CMat::Zero(N, N);
        const auto& served = svc.serving(m);
        if (served.empty())
            for (std::size_t k = 0; k < cs.num_ues(); ++k)
                sum += cs.R(m, k);
        else
            for (std::size_t k : served)
                sum += cs.R(m, k);
        const HermitianEigen e = eig_hermitian_desc(sum);
        CMat cand(N, static_cast<Eigen::Index>(L) + N);
        cand << e.vectors.leftCols(static_cast<Eigen::Index>(L)), CMat::Identity(N, N);
        const CMat Wp = orthonormalize_columns(cand, static_cast<Eigen::Index>(L)).basis;
        ApDesign d = finish_ap_design(Wp, eps, max_iters);
        if (d.rank_guard)
            h.warnings.push_back("AP " + std::to_string(m) + ": phase constraint stopped before rank loss");
        else if (!d.converged)
            h.warnings.push_back("AP " + std::to_string(m) + ": phase constraint did not converge");
        h.aps.push_back(std::move(d));
    }
    return h;
}

inline HybridDesign design_analog(AnalogMethod method, const CorrelationSet& cs, const ServiceMap& svc,
                                  std::size_t L, double eps)
{
    switch (method) {
    case AnalogMethod::proposed: return proposed_design(cs, svc, L, eps);
    case AnalogMethod::svd: return baseline_svd_design(cs, svc, L, eps);
    case AnalogMethod::digital: return digital_design(cs.num_aps(), cs.antennas());
    }
    throw ConfigError("analog out of range");
}

// ---------------------------------------------------------------------------
// Effective (post analog) statistics
// ---------------------------------------------------------------------------

struct EffectiveCorrelations
{
    Grid<CMat> R;              // B_m^* R_{m,k} B_m
    std::vector<CMat> coloring; // B_m^* B_m
    std::size_t dim() const { return coloring.empty() ? 0 : static_cast<std::size_t>(coloring.front().rows()); }
};

inline EffectiveCorrelations effective_correlations(const CorrelationSet& cs, const std::vector<CMat>& chains)
{
    EffectiveCorrelations out;
    out.R = Grid<CMat>(cs.num_aps(), cs.num_ues());
    for (std::size_t m = 0; m < cs.num_aps(); ++m) {
        const CMat& B = chains[m];
        out.coloring.push_back(hermitianize(B.adjoint() * B));
        for (std::size_t k = 0; k < cs.num_ues(); ++k)
            out.R(m, k) = hermitianize(B.adjoint() * cs.R(m, k) * B);
    }
    return out;
}

// Effective channels g_{m,k} = B_m^* h_{m,k}.
inline Grid<CVec> effective_channels(const ChannelRealization& ch, const std::vector<CMat>& chains)
{
    Grid<CVec> g(ch.h.rows(), ch.h.cols());
    for (std::size_t m = 0; m < ch.h.rows(); ++m)
        for (std::size_t k = 0; k < ch.h.cols(); ++k)
            g(m, k) = chains[m].adjoint() * ch.h(m, k);
    return g;
}

} // namespace cfmimo

#endif
