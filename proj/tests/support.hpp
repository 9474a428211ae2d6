// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit tests and the acceptance runner.

#ifndef CFMIMO_TESTS_SUPPORT_HPP
#define CFMIMO_TESTS_SUPPORT_HPP

#include <algorithm>
#include <random>
#include <vector>

#include "cfmimo/cfmimo.hpp"

namespace cfmimo::testing
{

// Random Hermitian PSD matrix X X^* / rank scaled to unit average eigenvalue.
inline CMat random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank, double scale = 1.0)
{
    const CMat X = complex_normal(rng, n, rank);
    return hermitianize(scale * X * X.adjoint() / static_cast<double>(rank));
}

// Haar-ish unitary from the QR of a complex Gaussian matrix.
inline CMat random_unitary(Rng& rng, Eigen::Index n)
{
    Eigen::HouseholderQR<CMat> qr(complex_normal(rng, n, n));
    return qr.householderQ() * CMat::Identity(n, n);
}

inline CMat random_semi_unitary(Rng& rng, Eigen::Index n, Eigen::Index cols)
{
    return random_unitary(rng, n).leftCols(cols);
}

inline double rel_diff(double a, double b)
{
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline double rel_fro(const CMat& a, const CMat& ref)
{
    const double n = ref.norm();
    return n == 0.0 ? a.norm() : (a - ref).norm() / n;
}

// Small desk-scale scenario used throughout the tests.
inline Scenario desk_scenario(std::size_t M = 8, std::size_t N = 8, std::size_t L = 4, std::size_t K = 8,
                              std::size_t tau = 4, std::uint64_t seed = 1)
{
    Scenario s;
    s.num_aps = M;
    s.antennas_per_ap = N;
    s.rf_chains = L;
    s.num_ues = K;
    s.pilot_len = tau;
    s.seed = seed;
    s.validate();
    return s;
}

// Everything needed to run link-level code on one drop.
struct DropFixture
{
    Scenario scenario;
    PreparedDrop prepared;
    EstimationStats stats;
    LinkContext ctx;

    DropFixture(const Scenario& s, AnalogMethod analog, PilotMethod pilots, std::uint64_t drop = 0)
        : scenario(s), prepared(prepare_drop(s, drop, analog))
    {
        const PilotOutcome po = choose_pilots(s, prepared, pilots, drop);
        stats = estimation_statistics(prepared.eff, po.book, s.pilot_power, s.noise_power());
        ctx.correlations = &prepared.drop.correlations;
        ctx.service = &prepared.drop.service;
        ctx.chains = prepared.chains;
        ctx.stats = &stats;
        ctx.powers = ue_powers(s);
        ctx.noise = s.noise_power();
        ctx.rzf_reg = s.rzf_reg * s.noise_power();
        ctx.seed = derive_seed(s.seed, Stream::drop, drop);
    }
    DropFixture(const DropFixture&) = delete;
    DropFixture& operator=(const DropFixture&) = delete;
};

} // namespace cfmimo::testing

#endif
