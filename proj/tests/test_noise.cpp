#include <cmath>
#include <cstdint>
#include <random>

#include <gtest/gtest.h>

#include "monfermi/noise.hpp"

using namespace monfermi;

TEST(StandardEngine, TenThousandthOutputIsStandardValue) {
    std::mt19937_64 e;
    e.discard(9999);
    EXPECT_EQ(e(), 9981545732273789042ULL);
}

TEST(NoiseStream, SameSeedsReproduce) {
    NoiseStream a(5, 3, 77), b(5, 3, 77);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(a.uniform(), b.uniform());
        EXPECT_EQ(a.normal(), b.normal());
    }
}

TEST(NoiseStream, DistinctIndicesDiffer) {
    NoiseStream a(5, 3, 77), b(5, 4, 77), c(5, 3, 78), d(6, 3, 77);
    const double x = a.uniform();
    EXPECT_NE(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_NE(x, d.uniform());
}

TEST(NoiseStream, HighWordsOfSeedsMatter) {
    NoiseStream a(1, 0, 0), b(1 + (std::uint64_t{1} << 32), 0, 0);
    EXPECT_NE(a.uniform(), b.uniform());
}

TEST(NoiseStream, UniformInHalfOpenUnitInterval) {
    NoiseStream ns(1, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = ns.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(GaussianIncrements, ZeroVarianceGivesZerosButConsumesDraws) {
    NoiseStream a(9, 0), b(9, 0);
    const auto z = gaussian_increments(a, 8, 0.0);
    EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
    gaussian_increments(b, 8, 1.0);
    EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(GaussianIncrements, NegativeVarianceThrows) {
    NoiseStream ns(1, 0);
    EXPECT_THROW(gaussian_increments(ns, 3, -1e-3), std::invalid_argument);
}

TEST(GaussianIncrements, MomentsAtMonitoringVariance) {
    // gamma = 0.1, dt = 0.05.
    const double var = 0.005;
    const int count = 1000000;
    NoiseStream ns(2024, 0);
    const Eigen::VectorXd x = gaussian_increments(ns, count, var);
    const double mean = x.mean();
    const double sample_var = (x.array() - mean).square().sum() / (count - 1);
    EXPECT_LT(std::abs(mean), 4.0 * std::sqrt(var / count));
    EXPECT_NEAR(sample_var / var, 1.0, 0.01);
    // Fourth moment of a normal is 3 sigma^4; its estimator has relative spread about sqrt(96/count).
    const double m4 = (x.array() - mean).pow(4).mean();
    EXPECT_NEAR(m4 / (3 * var * var), 1.0, 0.04);
}
