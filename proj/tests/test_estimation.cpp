// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"

using namespace cfmimo;
using namespace cfmimo::testing;

namespace
{
EffectiveCorrelations random_effective(Rng& rng, std::size_t M, std::size_t K, Eigen::Index L, Eigen::Index rank)
{
    EffectiveCorrelations e;
    e.R = Grid<CMat>(M, K);
    for (auto& r : e.R)
        r = random_psd(rng, L, rank);
    for (std::size_t m = 0; m < M; ++m)
        e.coloring.push_back(random_psd(rng, L, 2 * L) + 0.5 * CMat::Identity(L, L));
    return e;
}

// Psi_m = p sum_i (phi_i phi_i^*)^T (x) R_i + sigma^2 I_tau (x) B^*B for column-major vec(Y).
CMat kron(const CMat& a, const CMat& b)
{
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMat psi(const EffectiveCorrelations& e, const PilotBook& book, std::size_t m, double p, double noise)
{
    const Eigen::Index L = e.R(0, 0).rows();
    const auto tau = static_cast<Eigen::Index>(book.tau);
    CMat out = noise * kron(CMat::Identity(tau, tau), e.coloring[m]);
    for (std::size_t i = 0; i < book.num_ues(); ++i) {
        const CVec phi = book.sequence(book.assignment[i]);
        out += p * kron(phi * phi.adjoint(), e.R(m, i));
    }
    (void)L;
    return out;
}

CMat phi_kron(const PilotBook& book, std::size_t k, Eigen::Index L)
{
    return kron(book.sequence(book.assignment[k]), CMat::Identity(L, L));
}

CVec vec(const CMat& Y)
{
    return Eigen::Map<const CVec>(Y.data(), Y.size());
}
} // namespace

TEST(PilotBook, SequencesOrthogonal)
{
    const PilotBook b = PilotBook::round_robin(4, 6);
    const CMat Phi = b.matrix();
    for (std::size_t k = 0; k < 6; ++k)
        EXPECT_NEAR(Phi.col(static_cast<Eigen::Index>(k)).squaredNorm(), 4.0, 1e-12);
    for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t q = 0; q < 4; ++q)
            EXPECT_NEAR(std::abs(b.sequence(p).dot(b.sequence(q))), p == q ? 4.0 : 0.0, 1e-12);
    EXPECT_EQ(b.group(1), (std::vector<std::size_t>{1, 5}));
    EXPECT_THROW(PilotBook(2, {0, 2}), ConfigError);
}

TEST(EstimationStats, ScalarExample)
{
    EffectiveCorrelations e;
    e.R = Grid<CMat>(1, 1, CMat::Ones(1, 1));
    e.coloring = {CMat::Ones(1, 1)};
    const EstimationStats st = estimation_statistics(e, PilotBook(1, {0}), 1.0, 1.0);
    EXPECT_NEAR(st.gamma(0, 0)(0, 0).real(), 0.5, 1e-15);
    EXPECT_NEAR(st.error(0, 0)(0, 0).real(), 0.5, 1e-15);
}

TEST(EstimationStats, NoPilotEnergy)
{
    Rng rng = make_rng(1, Stream::test);
    const EffectiveCorrelations e = random_effective(rng, 2, 3, 3, 3);
    const EstimationStats st = estimation_statistics(e, PilotBook::round_robin(2, 3), 1e-14, 1.0);
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_LT(st.gamma(m, k).norm(), 1e-12);
            EXPECT_LT(rel_fro(st.error(m, k), e.R(m, k)), 1e-12);
        }
}

TEST(EstimationStats, SharedPilotSymmetry)
{
    Rng rng = make_rng(2, Stream::test);
    EffectiveCorrelations e = random_effective(rng, 1, 2, 3, 3);
    e.R(0, 1) = e.R(0, 0);
    const EstimationStats st = estimation_statistics(e, PilotBook(1, {0, 0}), 0.2, 0.1);
    EXPECT_LT(rel_fro(st.gamma(0, 0), st.gamma(0, 1)), 1e-14);
}

TEST(EstimationStats, MatchesFullSystemOracle)
{
    Rng rng = make_rng(3, Stream::test);
    for (int t = 0; t < 20; ++t) {
        const EffectiveCorrelations e = random_effective(rng, 2, 5, 3, 1 + t % 3);
        const std::vector<std::size_t> assign{0, 1, 0, 2, 1};
        const PilotBook book(3, assign);
        const double p = 0.2, noise = 0.05;
        const EstimationStats st = estimation_statistics(e, book, p, noise);
        for (std::size_t m = 0; m < 2; ++m) {
            const CMat P = psi(e, book, m, p, noise);
            for (std::size_t k = 0; k < 5; ++k) {
                const CMat X = phi_kron(book, k, 3);
                const CMat G = p * e.R(m, k) * X.adjoint() * solve_hpd(P, X) * e.R(m, k);
                EXPECT_LT(rel_fro(st.gamma(m, k), G), 1e-9);
                const HermitianEigen c = eig_hermitian_desc(st.error(m, k));
                EXPECT_GE(c.values.minCoeff(), -1e-10 * e.R(m, k).norm());
            }
            // estimates from the same observation
            const CMat Y = complex_normal(rng, 3, 3);
            std::vector<CMat> Ys(2, CMat::Zero(3, 3));
            Ys[m] = Y;
            const Grid<CVec> g = mmse_estimate(Ys, st);
            for (std::size_t k = 0; k < 5; ++k) {
                const CVec ref = std::sqrt(p) * e.R(m, k) * phi_kron(book, k, 3).adjoint() * solve_hpd(P, vec(Y));
                EXPECT_LT((g(m, k) - ref).norm(), 1e-9 * ref.norm());
            }
        }
    }
}

TEST(EstimationStats, IncrementalUpdateMatchesFull)
{
    Rng rng = make_rng(4, Stream::test);
    const EffectiveCorrelations e = random_effective(rng, 3, 6, 2, 2);
    const PilotBook a(3, {0, 1, 2, 0, 1, 2});
    const PilotBook b(3, {0, 1, 2, 2, 1, 2}); // UE 3 moves from pilot 0 to 2
    const EstimationStats base = estimation_statistics(e, a, 0.2, 0.1);
    const EstimationStats upd = update_estimation_statistics(base, b, {0, 2});
    const EstimationStats full = estimation_statistics(e, b, 0.2, 0.1);
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t k = 0; k < 6; ++k)
            EXPECT_LT(rel_fro(upd.gamma(m, k), full.gamma(m, k)), 1e-14);
}

TEST(EstimationStats, MonotoneInPilotPower)
{
    Rng rng = make_rng(5, Stream::test);
    for (int t = 0; t < 50; ++t) {
        const EffectiveCorrelations e = random_effective(rng, 1, 3, 3, 2);
        const PilotBook book(2, {0, 1, 0});
        const EstimationStats lo = estimation_statistics(e, book, 0.1, 0.3);
        const EstimationStats hi = estimation_statistics(e, book, 0.4, 0.3);
        for (std::size_t k = 0; k < 3; ++k) {
            const HermitianEigen d = eig_hermitian_desc(hermitianize(hi.gamma(0, k) - lo.gamma(0, k)));
            EXPECT_GE(d.values.minCoeff(), -1e-12 * hi.gamma(0, k).norm());
            EXPECT_GE(hi.gamma(0, k).trace().real(), lo.gamma(0, k).trace().real());
        }
    }
}

TEST(EstimationStats, RejectsMismatchedBook)
{
    Rng rng = make_rng(6, Stream::test);
    const EffectiveCorrelations e = random_effective(rng, 1, 3, 2, 2);
    EXPECT_THROW(estimation_statistics(e, PilotBook::round_robin(2, 4), 0.2, 0.1), ConfigError);
}

namespace
{
struct Bench
{
    CorrelationSet cs;
    std::vector<CMat> chains;
    EffectiveCorrelations eff;
};

Bench small_setup(std::uint64_t seed)
{
    Rng rng = make_rng(seed, Stream::test);
    Grid<CMat> R(2, 3);
    for (auto& r : R)
        r = random_psd(rng, 4, 3);
    Bench s{CorrelationSet(R), {}, {}};
    for (int m = 0; m < 2; ++m)
        s.chains.push_back(complex_normal(rng, 4, 2));
    s.eff = effective_correlations(s.cs, s.chains);
    return s;
}
} // namespace

TEST(PilotObservations, ZeroPowerZeroNoise)
{
    const Bench s = small_setup(7);
    Rng rng = make_rng(7, Stream::pilot_noise);
    const auto ch = sample_channels(s.cs, rng);
    for (const CMat& Y : pilot_observations(ch, s.chains, PilotBook::round_robin(2, 3), 0.0, 0.0, rng))
        EXPECT_EQ(Y.norm(), 0.0);
}

TEST(PilotObservations, NoiselessStructure)
{
    const Bench s = small_setup(8);
    Rng rng = make_rng(8, Stream::pilot_noise);
    const auto ch = sample_channels(s.cs, rng);
    const PilotBook book(3, {2, 0, 1});
    const auto Y = pilot_observations(ch, s.chains, book, 0.3, 0.0, rng);
    const Grid<CVec> g = effective_channels(ch, s.chains);
    for (std::size_t m = 0; m < 2; ++m) {
        CMat expect = CMat::Zero(2, 3);
        for (std::size_t k = 0; k < 3; ++k)
            expect += std::sqrt(0.3) * g(m, k) * book.sequence(book.assignment[k]).transpose();
        EXPECT_LT(rel_fro(Y[m], expect), 1e-12);
    }
}

TEST(PilotObservations, NoiseMeanVanishes)
{
    const Bench s = small_setup(9);
    Rng rng = make_rng(9, Stream::pilot_noise);
    const auto ch = sample_channels(s.cs, rng);
    const PilotBook book = PilotBook::round_robin(2, 3);
    const auto clean = pilot_observations(ch, s.chains, book, 0.3, 0.0, rng);
    CMat acc = CMat::Zero(2, 2);
    const int n = 4000;
    for (int i = 0; i < n; ++i)
        acc += pilot_observations(ch, s.chains, book, 0.3, 1.0, rng)[0];
    const double noise_sd = std::sqrt(s.eff.coloring[0].trace().real() * 2.0 / n);
    EXPECT_LT((acc / n - clean[0]).norm(), 5.0 * noise_sd);
}

TEST(MmseEstimate, NoiselessOrthogonalIsExact)
{
    const Bench s = small_setup(10);
    const PilotBook book(3, {0, 1, 2});
    const EstimationStats st = estimation_statistics(s.eff, book, 0.2, 0.0);
    Rng rng = make_rng(10, Stream::pilot_noise);
    const auto ch = sample_channels(s.cs, rng);
    const Grid<CVec> g = effective_channels(ch, s.chains);
    const Grid<CVec> gh = mmse_estimate(pilot_observations(ch, s.chains, book, 0.2, 0.0, rng), st);
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t k = 0; k < 3; ++k)
            EXPECT_LT((gh(m, k) - g(m, k)).norm(), 1e-9 * g(m, k).norm());
}

TEST(MmseEstimate, ZeroObservation)
{
    const Bench s = small_setup(11);
    const EstimationStats st = estimation_statistics(s.eff, PilotBook::round_robin(2, 3), 0.2, 0.1);
    const Grid<CVec> gh = mmse_estimate({CMat::Zero(2, 2), CMat::Zero(2, 2)}, st);
    for (const CVec& v : gh)
        EXPECT_EQ(v.norm(), 0.0);
}

TEST(MmseEstimate, MonteCarloMoments)
{
    const Bench s = small_setup(12);
    const PilotBook book(2, {0, 1, 0});
    const double p = 0.5, noise = 0.2;
    const EstimationStats st = estimation_statistics(s.eff, book, p, noise);
    const int n = 10000;
    Grid<CMat> cov_hat(2, 3, CMat::Zero(2, 2)), cov_err(2, 3, CMat::Zero(2, 2)), cross(2, 3, CMat::Zero(2, 2));
    for (int b = 0; b < n; ++b) {
        Rng rng = make_rng(12, Stream::channel, static_cast<std::uint64_t>(b));
        const auto ch = sample_channels(s.cs, rng);
        const Grid<CVec> g = effective_channels(ch, s.chains);
        const Grid<CVec> gh = mmse_estimate(pilot_observations(ch, s.chains, book, p, noise, rng), st);
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t k = 0; k < 3; ++k) {
                const CVec e = g(m, k) - gh(m, k);
                cov_hat(m, k) += gh(m, k) * gh(m, k).adjoint();
                cov_err(m, k) += e * e.adjoint();
                cross(m, k) += gh(m, k) * e.adjoint();
            }
    }
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_LT(rel_fro(cov_hat(m, k) / n, st.gamma(m, k)), 0.05);
            EXPECT_LT(rel_fro(cov_err(m, k) / n, st.error(m, k)), 0.05);
            const double sigma =
                std::sqrt(st.gamma(m, k).trace().real() * st.error(m, k).trace().real() / n);
            EXPECT_LT((cross(m, k) / n).norm(), 5.0 * sigma);
        }
}
