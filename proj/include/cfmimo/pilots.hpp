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

#ifndef CFMIMO_PILOTS_HPP
#define CFMIMO_PILOTS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cfmimo/core.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/hybrid.hpp"
#include "cfmimo/link.hpp"
#include "cfmimo/rmt.hpp"
#include "cfmimo/scenario.hpp"

namespace cfmimo
{

// Normalized cross-correlation tr(G_k G_i) / (tr G_k tr G_i) of the masked
// estimate covariances, with each UE on its own pilot.
inline RMat pilot_correlation(const EffectiveCorrelations& eff, const ServiceMap& svc, std::size_t tau,
                              double pilot_power, double noise)
{
    const std::size_t M = eff.R.rows();
    const std::size_t K = eff.R.cols();
    const Eigen::Index L = static_cast<Eigen::Index>(eff.dim());
    Grid<CMat> gam(M, K);
    RVec tr = RVec::Zero(static_cast<Eigen::Index>(K));
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) {
            if (!svc.serves(m, k)) {
                gam(m, k) = CMat::Zero(L, L);
                continue;
            }
            const CMat& R = eff.R(m, k);
            const CMat Q = static_cast<double>(tau) * pilot_power * R + noise * eff.coloring[m];
            gam(m, k) = static_cast<double>(tau) * pilot_power * R * solve_hpd(Q, R);
            tr(static_cast<Eigen::Index>(k)) += gam(m, k).trace().real();
        }
    RMat out = RMat::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < K; ++i) {
            if (i == k)
                continue;
            double d = 0.0;
            for (std::size_t m = 0; m < M; ++m)
                if (svc.serves(m, k) && svc.serves(m, i))
                    d += trace_product(gam(m, k), gam(m, i)).real();
            const double t = tr(static_cast<Eigen::Index>(k)) * tr(static_cast<Eigen::Index>(i));
            out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = t > 0.0 ? d / t : 0.0;
        }
    return out;
}

// Partition into tau groups from a correlation matrix. The tau seeds are the
// most strongly correlated UEs (the max pair, then whichever UE has the
// largest summed correlation to the seeds so far), one per group. Remaining
// UEs join, in index order, the group where their largest correlation with a
// member is smallest; ties go to the smaller group, then the lower index.
inline PilotBook assign_initial_pilots(const RMat& corr, std::size_t tau)
{
    const auto K = static_cast<std::size_t>(corr.rows());
    std::vector<std::size_t> a(K, 0);
    if (K <= tau) {
        for (std::size_t k = 0; k < K; ++k)
            a[k] = k;
        return PilotBook(tau, std::move(a));
    }
    auto c = [&](std::size_t i, std::size_t j) {
        return std::max(corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                        corr(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
    };
    std::vector<std::size_t> seeds;
    std::vector<char> placed(K, 0);
    if (tau >= 2) {
        std::size_t bi = 0, bj = 1;
        double best = -1.0;
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = i + 1; j < K; ++j)
                if (c(i, j) > best) {
                    best = c(i, j);
                    bi = i;
                    bj = j;
                }
        seeds = {bi, bj};
        while (seeds.size() < tau) {
            std::size_t arg = K;
            double bs = -1.0;
            for (std::size_t k = 0; k < K; ++k) {
                if (std::find(seeds.begin(), seeds.end(), k) != seeds.end())
                    continue;
                double s = 0.0;
                for (std::size_t q : seeds)
                    s += c(k, q);
                if (s > bs) {
                    bs = s;
                    arg = k;
                }
            }
            seeds.push_back(arg);
        }
    }
    else {
        seeds = {0};
    }
    std::vector<std::vector<std::size_t>> groups(tau);
    for (std::size_t g = 0; g < tau; ++g) {
        groups[g].push_back(seeds[g]);
        placed[seeds[g]] = 1;
        a[seeds[g]] = g;
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (placed[k])
            continue;
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < tau; ++g) {
            double worst = 0.0;
            for (std::size_t q : groups[g])
                worst = std::max(worst, c(k, q));
            if (worst < best || (worst == best && groups[g].size() < groups[arg].size())) {
                best = worst;
                arg = g;
            }
        }
        groups[arg].push_back(k);
        a[k] = arg;
    }
    return PilotBook(tau, std::move(a));
}

inline PilotBook random_pilots(std::size_t tau, std::size_t K, std::uint64_t seed, std::uint64_t index)
{
    Rng rng = make_rng(seed, Stream::random_pilots, index);
    std::uniform_int_distribution<std::size_t> pick(0, tau - 1);
    std::vector<std::size_t> a(K);
    for (auto& p : a)
        p = pick(rng);
    return PilotBook(tau, std::move(a));
}

// ---------------------------------------------------------------------------
// Greedy max-min assignment
// ---------------------------------------------------------------------------

// Maps a pilot book to the per-UE deterministic-equivalent SINR. Candidate
// books differ from the current one in one UE only, so statistics are updated
// for the two affected pilot groups.
class SinrEvaluator
{
  public:
    SinrEvaluator(const EffectiveCorrelations& eff, const ServiceMap& svc, RVec powers, double pilot_power,
                  double noise, double reg, PilotObjective objective)
        : eff_(eff), svc_(svc), powers_(std::move(powers)), pilot_power_(pilot_power), noise_(noise), reg_(reg),
          objective_(objective)
    {
    }

    EstimationStats stats(const PilotBook& book) const
    {
        return estimation_statistics(eff_, book, pilot_power_, noise_);
    }

    RVec evaluate(const EstimationStats& st) const
    {
        if (objective_ == PilotObjective::uplink) {
            const auto blocks = effective_noise_blocks(st, powers_, svc_);
            return ul_sinr_asymptotic(st, powers_, svc_, blocks).sinr;
        }
        return dl_sinr_asymptotic(st, powers_, svc_, reg_).sinr;
    }

    RVec evaluate(const PilotBook& book) const { return evaluate(stats(book)); }

  private:
    const EffectiveCorrelations& eff_;
    const ServiceMap& svc_;
    RVec powers_;
    double pilot_power_;
    double noise_;
    double reg_;
    PilotObjective objective_;
};

struct AssignmentTrace
{
    std::vector<PilotBook> books; // after each sweep, books[0] is the start
    std::vector<double> cost;     // min_k SINR-bar
    std::size_t sweeps = 0;
    bool converged = false;
    std::vector<std::string> warnings;

    const PilotBook& final_book() const { return books.back(); }
};

inline AssignmentTrace greedy_pilot_assignment(const SinrEvaluator& eval, const PilotBook& start, double eps,
                                               std::size_t max_sweeps = 100)
{
    AssignmentTrace tr;
    PilotBook book = start;
    EstimationStats st = eval.stats(book);
    double mu = eval.evaluate(st).minCoeff();
    tr.books.push_back(book);
    tr.cost.push_back(mu);
    const std::size_t K = book.num_ues();
    while (tr.sweeps < max_sweeps) {
        const double before = mu;
        for (std::size_t u = 0; u < K; ++u) {
            const std::size_t cur = book.assignment[u];
            std::size_t best_p = cur;
            double best = mu;
            EstimationStats best_st;
            for (std::size_t p = 0; p < book.tau; ++p) {
                if (p == cur)
                    continue;
                PilotBook cand = book;
                cand.assignment[u] = p;
                try {
                    EstimationStats cs = update_estimation_statistics(st, cand, {cur, p});
                    const double v = eval.evaluate(cs).minCoeff();
                    if (v > best) {
                        best = v;
                        best_p = p;
                        best_st = std::move(cs);
                    }
                }
                catch (const NumericalError& e) {
                    tr.warnings.push_back("UE " + std::to_string(u) + ", pilot " + std::to_string(p) +
                                          ": candidate skipped (" + e.what() + ")");
                }
            }
            if (best_p != cur) {
                book.assignment[u] = best_p;
                st = std::move(best_st);
                mu = best;
            }
        }
        ++tr.sweeps;
        tr.books.push_back(book);
        tr.cost.push_back(mu);
        const double gain = before > 0.0 ? (mu - before) / before : (mu > before ? 1.0 : 0.0);
        if (!(gain > eps)) {
            tr.converged = true;
            break;
        }
    }
    return tr;
}

} // namespace cfmimo

#endif
