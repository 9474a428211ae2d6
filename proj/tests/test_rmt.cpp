// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"

using namespace cfmimo;
using namespace cfmimo::testing;

namespace
{
CMat scalar(double v)
{
    return CMat::Constant(1, 1, v);
}

// Root of f on [lo, hi] by bisection, f(lo) and f(hi) of opposite sign.
template <class F>
double bisect(F f, double lo, double hi)
{
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}
} // namespace

TEST(FixedPoint, ScalarGoldenRatio)
{
    const auto st = fixed_point_e<CMat>({scalar(1)}, scalar(0), 1.0, 1.0);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    EXPECT_NEAR(st.e(0), g, 1e-9);
    EXPECT_NEAR(st.T(0, 0).real(), g, 1e-9);
    EXPECT_LE(st.iterations, 500u);
}

TEST(FixedPoint, ScalarDerivatives)
{
    const std::vector<CMat> R{scalar(1)};
    const auto st = fixed_point_e<CMat>(R, scalar(0), 1.0, 1.0);
    const RMat J = derivative_matrix(R, st, 1.0);
    EXPECT_NEAR(J(0, 0), 0.14590, 1e-5);
    const RVec ep = e_prime(R, st, scalar(1), 1.0);
    EXPECT_NEAR(ep(0), 0.44721, 1e-5);
    EXPECT_NEAR(ep(0) * (1.0 - J(0, 0)), 0.38197, 1e-5); // v = T^2
    const CMat Tp = t_prime(R, st, ep, scalar(1), 1.0);
    EXPECT_NEAR(Tp(0, 0).real(), 0.44721, 1e-5);
}

TEST(FixedPoint, ZeroCorrelations)
{
    Rng rng = make_rng(1, Stream::test);
    const CMat S = random_psd(rng, 3, 3);
    const std::vector<CMat> R(2, CMat::Zero(3, 3));
    const auto st = fixed_point_e<CMat>(R, S, 0.5, 3.0);
    EXPECT_EQ(st.e.norm(), 0.0);
    EXPECT_LT(rel_fro(st.T, inverse_hpd(CMat(S + 0.5 * CMat::Identity(3, 3)))), 1e-12);
    const RVec ep = e_prime(R, st, CMat(CMat::Zero(3, 3)), 3.0);
    EXPECT_EQ(ep.norm(), 0.0);
}

TEST(FixedPoint, TwoIdenticalUesAgainstRootFinder)
{
    for (double z : {0.2, 1.0, 3.0}) {
        const auto st = fixed_point_e<CMat>({scalar(1), scalar(1)}, scalar(0), z, 1.0);
        EXPECT_NEAR(st.e(0), st.e(1), 1e-12);
        // e = 1 / (2 / (1 + e) + z)
        const double root = bisect([z](double e) { return e - 1.0 / (2.0 / (1.0 + e) + z); }, 0.0, 1.0 / z);
        EXPECT_NEAR(st.e(0), root, 1e-9);
        const RVec ep = e_prime<CMat>({scalar(1), scalar(1)}, st, scalar(1), 1.0);
        EXPECT_NEAR(ep(0), ep(1), 1e-12);
    }
}

TEST(FixedPoint, ZeroPhiAndHermitianDerivative)
{
    Rng rng = make_rng(2, Stream::test);
    for (int t = 0; t < 20; ++t) {
        std::vector<CMat> R;
        for (int k = 0; k < 5; ++k)
            R.push_back(random_psd(rng, 6, 2 + k % 3));
        const auto st = fixed_point_e<CMat>(R, random_psd(rng, 6, 6, 0.1), 0.3, 6.0);
        const CMat zero = CMat::Zero(6, 6);
        const RVec ez = e_prime(R, st, zero, 6.0);
        EXPECT_EQ(t_prime(R, st, ez, zero, 6.0).norm(), 0.0);
        const CMat Phi = random_psd(rng, 6, 3);
        const RVec ep = e_prime(R, st, Phi, 6.0);
        const CMat Tp = t_prime(R, st, ep, Phi, 6.0);
        EXPECT_LT(hermitian_defect(Tp), 1e-12 * Tp.norm());
        for (Eigen::Index k = 0; k < ep.size(); ++k)
            EXPECT_GE(ep(k), 0.0);
        // with e' = 0 the derivative reduces to T Phi T
        EXPECT_LT(rel_fro(t_prime(R, st, RVec::Zero(5), Phi, 6.0), st.T * Phi * st.T), 1e-12);
    }
}

TEST(FixedPoint, DerivativeMatchesFiniteDifference)
{
    Rng rng = make_rng(3, Stream::test);
    for (Eigen::Index dim : {1, 4}) {
        std::vector<CMat> R;
        for (int k = 0; k < 3; ++k)
            R.push_back(random_psd(rng, dim, dim));
        const CMat S = CMat::Zero(dim, dim);
        const double z = 0.7, h = 1e-4 * z, n = static_cast<double>(dim);
        FixedPointOptions tight;
        tight.tol = 1e-14;
        tight.max_iters = 10000;
        const auto st = fixed_point_e(R, S, z, n, tight);
        const auto up = fixed_point_e(R, S, z + h, n, tight);
        const auto dn = fixed_point_e(R, S, z - h, n, tight);
        const CMat I = CMat::Identity(dim, dim);
        const CMat Tp = t_prime(R, st, e_prime(R, st, I, n), I, n);
        const CMat fd = -(up.T - dn.T) / (2.0 * h);
        EXPECT_LT((Tp - fd).cwiseAbs().maxCoeff(), 1e-4) << "dim " << dim;
    }
}

TEST(FixedPoint, NonConvergenceReported)
{
    FixedPointOptions opt;
    opt.max_iters = 1;
    opt.tol = 1e-14;
    try {
        fixed_point_e<CMat>({scalar(1)}, scalar(0), 1.0, 1.0, opt);
        FAIL() << "expected an error";
    }
    catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("did not converge"), std::string::npos);
    }
}

TEST(FixedPoint, BlockDiagAgreesWithDense)
{
    Rng rng = make_rng(4, Stream::test);
    std::vector<BlockDiag> Rb;
    std::vector<CMat> Rd;
    for (int k = 0; k < 4; ++k) {
        Rb.push_back(BlockDiag({random_psd(rng, 2, 2), random_psd(rng, 3, 2)}));
        Rd.push_back(Rb.back().dense());
    }
    const BlockDiag S({random_psd(rng, 2, 2, 0.1), random_psd(rng, 3, 3, 0.1)});
    const auto b = fixed_point_e(Rb, S, 0.2, 5.0);
    const auto d = fixed_point_e(Rd, S.dense(), 0.2, 5.0);
    EXPECT_LT((b.e - d.e).norm(), 1e-12 * d.e.norm());
    EXPECT_LT(rel_fro(b.T.dense(), d.T), 1e-10);
}

namespace
{
struct TheoremGaps
{
    double first;  // resolvent trace
    double second; // double resolvent trace
};

// H has columns R_j^{1/2} x / sqrt(n); compares (1/n) tr D Q and
// (1/n) tr D Q Phi Q, averaged over draws, with the equivalents.
TheoremGaps theorem_gaps(Eigen::Index n, std::size_t K, int draws, std::uint64_t seed)
{
    Rng rng = make_rng(seed, Stream::test);
    const double z = 1.0;
    std::vector<CMat> R, root;
    for (std::size_t k = 0; k < K; ++k) {
        R.push_back(random_psd(rng, n, n / 2));
        const HermitianEigen e = eig_hermitian_desc(R.back(), true);
        root.push_back(e.vectors * e.values.cwiseSqrt().cast<cplx>().asDiagonal());
    }
    const CMat D = random_psd(rng, n, n);
    const CMat Phi = random_psd(rng, n, n);
    const CMat zero = CMat::Zero(n, n);
    const auto st = fixed_point_e(R, zero, z, static_cast<double>(n));
    EXPECT_LE(st.iterations, 500u);
    const CMat Tp = t_prime(R, st, e_prime(R, st, Phi, static_cast<double>(n)), Phi, static_cast<double>(n));
    const double de1 = trace_product(D, st.T).real() / static_cast<double>(n);
    const double de2 = trace_product(D, Tp).real() / static_cast<double>(n);
    double ex1 = 0.0, ex2 = 0.0;
    for (int t = 0; t < draws; ++t) {
        CMat H(n, static_cast<Eigen::Index>(K));
        for (std::size_t k = 0; k < K; ++k)
            H.col(static_cast<Eigen::Index>(k)) = root[k] * complex_normal(rng, n) / std::sqrt(static_cast<double>(n));
        const CMat Q = inverse_hpd(CMat(H * H.adjoint() + z * CMat::Identity(n, n)));
        ex1 += trace_product(D, Q).real() / static_cast<double>(n);
        ex2 += trace_product(D, CMat(Q * Phi * Q)).real() / static_cast<double>(n);
    }
    ex1 /= draws;
    ex2 /= draws;
    return {std::abs(ex1 - de1) / std::abs(ex1), std::abs(ex2 - de2) / std::abs(ex2)};
}
} // namespace

TEST(Equivalents, ResolventAndDoubleResolvent)
{
    const TheoremGaps g = theorem_gaps(64, 16, 100, 5);
    EXPECT_LE(g.first, 0.05);
    EXPECT_LE(g.second, 0.08);
}

TEST(Uplink, ZeroEstimateGivesZero)
{
    const DropFixture f(desk_scenario(4, 8, 4, 8, 4), AnalogMethod::proposed, PilotMethod::initial);
    EstimationStats st = f.stats;
    for (std::size_t m = 0; m < st.num_aps(); ++m)
        st.gamma(m, 2) = CMat::Zero(st.dim(), st.dim());
    const auto blocks = effective_noise_blocks(st, f.ctx.powers, f.prepared.drop.service);
    const UplinkDE de = ul_sinr_asymptotic(st, f.ctx.powers, f.prepared.drop.service, blocks);
    EXPECT_EQ(de.sinr(2), 0.0);
    EXPECT_GT(de.sinr(0), 0.0);
}

TEST(Uplink, JointPowerNoiseScaling)
{
    const DropFixture f(desk_scenario(4, 8, 4, 8, 4, 2), AnalogMethod::proposed, PilotMethod::greedy);
    const ServiceMap& svc = f.prepared.drop.service;
    const UplinkDE a =
        ul_sinr_asymptotic(f.stats, f.ctx.powers, svc, effective_noise_blocks(f.stats, f.ctx.powers, svc));
    EstimationStats doubled = f.stats;
    doubled.noise *= 2.0;
    const RVec p2 = 2.0 * f.ctx.powers;
    const UplinkDE b = ul_sinr_asymptotic(doubled, p2, svc, effective_noise_blocks(doubled, p2, svc));
    for (Eigen::Index k = 0; k < a.sinr.size(); ++k)
        EXPECT_LT(rel_diff(a.sinr(k), b.sinr(k)), 1e-9);
}

TEST(Uplink, TracksMonteCarloOnADrop)
{
    const DropFixture f(desk_scenario(4, 8, 4, 8, 4), AnalogMethod::proposed, PilotMethod::greedy);
    const ServiceMap& svc = f.prepared.drop.service;
    const UplinkDE de =
        ul_sinr_asymptotic(f.stats, f.ctx.powers, svc, effective_noise_blocks(f.stats, f.ctx.powers, svc));
    const UplinkResult mc = ul_mmse_mc(f.ctx, 200, 4, 200);
    std::vector<double> gaps;
    for (Eigen::Index k = 0; k < de.sinr.size(); ++k)
        gaps.push_back(rel_diff(spectral_efficiency(de.sinr(k), 4, 200), mc.se(k)));
    EXPECT_LT(percentile(gaps, 0.5), 0.25);
}

TEST(Downlink, ZeroEstimatesGiveZero)
{
    const DropFixture f(desk_scenario(4, 8, 4, 4, 4), AnalogMethod::proposed, PilotMethod::initial);
    EstimationStats st = f.stats;
    for (auto& g : st.gamma)
        g.setZero();
    const DownlinkDE de = dl_sinr_asymptotic(st, f.ctx.powers, f.prepared.drop.service, f.ctx.rzf_reg);
    EXPECT_EQ(de.sinr.norm(), 0.0);
}

TEST(Downlink, SingleUeAgainstMonteCarlo)
{
    // Two finite-size terms separate a lone UE from its equivalent: the
    // normalization sees E[1/||g_hat||^2], about r/(r-1) times 1/E||g_hat||^2
    // for effective rank r, and the own estimation error adds roughly
    // p sigma^2 / (tau p_t) to the noise. Both vanish only with a rich
    // channel and strong pilots.
    Scenario s = desk_scenario(4, 16, 16, 1, 1);
    s.angular_spread_deg = std::numeric_limits<double>::infinity();
    s.shadow_std_db = 0.0;
    s.pilot_power = 100.0 * s.ue_power;
    const DropFixture f(s, AnalogMethod::digital, PilotMethod::initial);
    const DownlinkDE de = dl_sinr_asymptotic(f.stats, f.ctx.powers, f.prepared.drop.service, f.ctx.rzf_reg);
    const DownlinkResult mc = dl_rzf_sinr_mc(f.ctx, calibrate_rzf(f.ctx, 2000), 2000);
    EXPECT_GT(de.delta(0), 0.0);
    EXPECT_GE(de.mu(0), 0.0);
    EXPECT_LT(rel_diff(de.sinr(0), mc.sinr(0)), 0.10) << de.sinr(0) << " vs " << mc.sinr(0);
}

TEST(Downlink, BreakdownInvariants)
{
    const DropFixture f(desk_scenario(6, 8, 4, 6, 3, 4), AnalogMethod::proposed, PilotMethod::greedy);
    const DownlinkDE de = dl_sinr_asymptotic(f.stats, f.ctx.powers, f.prepared.drop.service, f.ctx.rzf_reg);
    for (Eigen::Index k = 0; k < de.sinr.size(); ++k) {
        EXPECT_GT(de.delta(k), 0.0);
        EXPECT_GE(de.mu(k), 0.0);
        EXPECT_TRUE(std::isfinite(de.sinr(k)));
        EXPECT_EQ(de.theta(k, k), 0.0);
    }
}
