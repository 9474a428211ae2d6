// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace cfmimo;
using namespace cfmimo::testing;

TEST(Pathloss, UrbanMicroValues)
{
    EXPECT_NEAR(pathloss_db(100.0, 2.0), 103.927, 1e-3);
    EXPECT_NEAR(large_scale_gain(100.0, 2.0), 4.05e-11, 0.02e-11);
    EXPECT_NEAR(pathloss_db(1.0, 2.0), 22.7 + 26.0 * std::log10(2.0), 1e-12);
    EXPECT_NEAR(pathloss_db(1.0, 2.0), 30.53, 1e-2);
    EXPECT_LT(large_scale_gain(200.0, 2.0), large_scale_gain(100.0, 2.0));
    EXPECT_EQ(pathloss_db(0.2, 2.0), pathloss_db(1.0, 2.0)); // clamp
}

namespace
{
Topology line_of_ues(const std::vector<double>& xs, std::size_t aps)
{
    Topology t;
    t.aps.assign(aps, Point{0, 0});
    for (double x : xs)
        t.ues.push_back({x, 0});
    return t;
}
} // namespace

TEST(Shadowing, ZeroSpread)
{
    Rng rng = make_rng(1, Stream::test);
    EXPECT_EQ(correlated_shadowing(line_of_ues({1, 50, 120}, 3), 0.0, 9.0, 200.0, rng).norm(), 0.0);
}

TEST(Shadowing, ColocatedUesIdentical)
{
    Rng rng = make_rng(2, Stream::test);
    const RMat s = correlated_shadowing(line_of_ues({30, 30, 100}, 5), 4.0, 9.0, 200.0, rng);
    for (Eigen::Index m = 0; m < 5; ++m)
        EXPECT_NEAR(s(m, 0), s(m, 1), 1e-6);
    EXPECT_GT((s.col(0) - s.col(2)).norm(), 0.1);
}

TEST(Shadowing, CovarianceAtDecorrelationLag)
{
    // every AP row is an independent draw, so 10^4 APs give 10^4 samples
    Rng rng = make_rng(3, Stream::test);
    const RMat s = correlated_shadowing(line_of_ues({20, 29}, 10000), 4.0, 9.0, 200.0, rng);
    const double cov = s.col(0).dot(s.col(1)) / 10000.0;
    const double expected = 16.0 * std::exp(-1.0);
    EXPECT_LT(std::abs(cov - expected) / expected, 0.05) << cov << " vs " << expected;
    EXPECT_NEAR(s.col(0).squaredNorm() / 10000.0, 16.0, 16.0 * 0.05);
}

TEST(SpatialCorrelation, IidAndSinglePath)
{
    EXPECT_EQ(spatial_correlation(2.0, 0.3, 0.1, 4, true), CMat(2.0 * CMat::Identity(4, 4)));
    const CMat R = spatial_correlation(2.0, 0.4, 0.0, 6);
    CVec a(6);
    for (Eigen::Index n = 0; n < 6; ++n)
        a(n) = std::polar(1.0, pi * static_cast<double>(n) * std::sin(0.4));
    EXPECT_LT(rel_fro(R, 2.0 * a * a.adjoint()), 1e-13);
    const HermitianEigen e = eig_hermitian_desc(R);
    EXPECT_LT(e.values(1), 1e-12 * e.values(0));
}

TEST(SpatialCorrelation, TwoAntennaKernel)
{
    const CMat R = spatial_correlation(3.0, 0.0, 0.1, 2);
    EXPECT_NEAR(R(0, 1).real(), 3.0 * std::exp(-0.04935), 3.0 * 1e-5);
    EXPECT_NEAR(R(0, 1).imag(), 0.0, 1e-15);
}

TEST(SpatialCorrelation, HermitianPsdWithTrace)
{
    Rng rng = make_rng(4, Stream::test);
    std::uniform_real_distribution<double> ang(-pi, pi);
    for (int t = 0; t < 50; ++t) {
        const double beta = 1e-9 * (1 + t);
        const CMat R = spatial_correlation(beta, ang(rng), 10.0 * pi / 180.0, 16);
        EXPECT_LT(hermitian_defect(R), 1e-12 * beta);
        EXPECT_NEAR(R.trace().real(), 16.0 * beta, 1e-9 * 16.0 * beta);
        const HermitianEigen e = eig_hermitian_desc(R);
        EXPECT_GE(e.values.minCoeff(), -1e-12 * beta);
    }
}

TEST(Drop, CorrelationSetInvariants)
{
    const Scenario s = desk_scenario(4, 8, 4, 6, 3, 2);
    const Drop d = generate_drop(s, 0);
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t k = 0; k < 6; ++k) {
            const CMat& R = d.correlations.R(m, k);
            const double beta = d.gain(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
            EXPECT_NEAR(R.trace().real(), 8.0 * beta, 1e-9 * 8.0 * beta);
            const auto& V = d.correlations.eigenvectors(m, k);
            const auto& l = d.correlations.eigenvalues(m, k);
            EXPECT_LT(rel_fro(V * l.cast<cplx>().asDiagonal() * V.adjoint(), R), 1e-9);
            EXPECT_GE(l.minCoeff(), 0.0);
        }
}

TEST(SampleChannels, ZeroCorrelationGivesZeroChannel)
{
    Grid<CMat> R(1, 1, CMat::Zero(3, 3));
    const CorrelationSet cs(R);
    EXPECT_EQ(sample_channels(cs, 1, 0).h(0, 0).norm(), 0.0);
}

TEST(SampleChannels, Deterministic)
{
    const Drop d = generate_drop(desk_scenario(2, 4, 2, 3, 3), 0);
    const auto a = sample_channels(d.correlations, 5, 7), b = sample_channels(d.correlations, 5, 7),
               c = sample_channels(d.correlations, 5, 8);
    EXPECT_EQ(a.h(1, 2), b.h(1, 2));
    EXPECT_NE(a.h(1, 2), c.h(1, 2));
}

namespace
{
double sample_covariance_error(std::size_t draws)
{
    Rng rng = make_rng(6, Stream::test);
    Grid<CMat> g(1, 1, spatial_correlation(1.0, 0.5, 0.2, 4));
    const CorrelationSet cs(g);
    CMat acc = CMat::Zero(4, 4);
    for (std::size_t n = 0; n < draws; ++n) {
        const CVec h = sample_channels(cs, rng).h(0, 0);
        acc += h * h.adjoint();
    }
    return rel_fro(acc / static_cast<double>(draws), cs.R(0, 0));
}
} // namespace

TEST(SampleChannels, SecondMoment)
{
    EXPECT_LT(sample_covariance_error(10000), 0.05);
    EXPECT_LT(sample_covariance_error(100000), 0.03);
}

TEST(CorrelationCsv, RoundTrip)
{
    const Drop d = generate_drop(desk_scenario(2, 3, 2, 2, 2), 1);
    std::stringstream ss;
    write_correlation_csv(ss, d.correlations);
    const CorrelationSet back = read_correlation_csv(ss);
    ASSERT_EQ(back.num_aps(), 2u);
    ASSERT_EQ(back.num_ues(), 2u);
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t k = 0; k < 2; ++k)
            EXPECT_EQ(back.R(m, k), d.correlations.R(m, k));
    std::stringstream bad("nope\n");
    EXPECT_THROW(read_correlation_csv(bad), ConfigError);
}
