#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "monfermi/lattice.hpp"
#include "monfermi/slater.hpp"
#include "test_util.hpp"

using namespace monfermi;
using monfermi::testing::max_abs;

TEST(BuildHopping, FourSitesNearestNeighbourWithPeriodicClosure) {
    const auto h = build_hopping(4, 1.0);
    EXPECT_EQ(h.entries(0, 1), cplx(0.5));
    EXPECT_EQ(h.entries(0, 3), cplx(0.5));
    EXPECT_EQ(h.entries(0, 0), cplx(0.0));
    EXPECT_EQ(h.entries(0, 2), cplx(0.0));
    EXPECT_EQ(h.entries(3, 0), cplx(0.5));
}

TEST(BuildHopping, ZeroCouplingIsZeroMatrix) {
    EXPECT_EQ(max_abs(build_hopping(4, 0.0).entries), 0.0);
}

TEST(BuildHopping, RejectsOddOrNonPositiveSizes) {
    EXPECT_THROW(build_hopping(5), std::invalid_argument);
    EXPECT_THROW(build_hopping(0), std::invalid_argument);
    EXPECT_THROW(build_hopping(-4), std::invalid_argument);
}

TEST(BuildHopping, TwoSitesDoublesTheBond) {
    const auto h = build_hopping(2, 0.7);
    EXPECT_DOUBLE_EQ(h.entries(0, 1).real(), 0.7);
    EXPECT_DOUBLE_EQ(h.entries(1, 0).real(), 0.7);
}

TEST(BuildHopping, InvariantsHoldAcrossSizes) {
    for (int L = 4; L <= 24; L += 2) {
        const double lambda = 0.3 + 0.1 * L;
        const auto h = build_hopping(L, lambda);
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) {
                EXPECT_EQ(h.entries(i, j), std::conj(h.entries(j, i)));
                EXPECT_EQ(h.entries(i, j).imag(), 0.0);
                const int d = ((i - j) % L + L) % L;
                const double expected = (d == 1 || d == L - 1) ? lambda / 2 : 0.0;
                EXPECT_EQ(h.entries(i, j).real(), expected) << "L=" << L << " i=" << i << " j=" << j;
            }
        }
    }
}

TEST(SpectralDecompose, EightSiteSpectrumIsCosineBand) {
    const auto spec = spectral_decompose(build_hopping(8, 1.0));
    std::vector<double> analytic;
    for (int k = 0; k < 8; ++k) analytic.push_back(std::cos(2 * std::numbers::pi * k / 8));
    std::sort(analytic.begin(), analytic.end());
    for (int k = 0; k < 8; ++k) EXPECT_NEAR(spec.values(k), analytic[k], 1e-12);
}

TEST(SpectralDecompose, TwoSiteConventionGivesPlusMinusLambda) {
    const double lambda = 1.3;
    const auto spec = spectral_decompose(build_hopping(2, lambda));
    EXPECT_NEAR(spec.values(0), -lambda, 1e-14);
    EXPECT_NEAR(spec.values(1), lambda, 1e-14);
}

TEST(SpectralDecompose, ScaledIdentity) {
    const double c = 0.37;
    const auto spec = spectral_decompose(CMatrix(c * CMatrix::Identity(6, 6)));
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(spec.values(k), c, 1e-15);
    EXPECT_LT(max_abs(spec.vectors.cwiseAbs().cast<cplx>() - CMatrix::Identity(6, 6)), 1e-14);
}

TEST(SpectralDecompose, ReconstructsAndIsUnitary) {
    for (int L : {4, 10, 32, 64}) {
        const auto h = build_hopping(L, 1.0);
        const auto spec = spectral_decompose(h);
        const CMatrix rebuilt = spec.vectors * spec.values.cast<cplx>().asDiagonal() * spec.vectors.adjoint();
        EXPECT_LT((rebuilt - h.entries).norm(), 1e-10);
        EXPECT_LT(max_abs(spec.vectors.adjoint() * spec.vectors - CMatrix::Identity(L, L)), 1e-12);
    }
}

TEST(UnitaryPropagator, SmallStepApproachesIdentity) {
    const auto p = unitary_propagator(build_hopping(8), 1e-8);
    EXPECT_LT(max_abs(p.entries - CMatrix::Identity(8, 8)), 1e-7);
}

TEST(UnitaryPropagator, ZeroHamiltonianIsIdentity) {
    for (double dt : {0.01, 1.0, 17.5}) {
        const auto p = unitary_propagator(build_hopping(6, 0.0), dt);
        EXPECT_LT(max_abs(p.entries - CMatrix::Identity(6, 6)), 1e-15);
    }
}

TEST(UnitaryPropagator, RejectsNonPositiveStep) {
    EXPECT_THROW(unitary_propagator(build_hopping(4), 0.0), std::invalid_argument);
}

TEST(UnitaryPropagator, TwoSiteRabiOscillation) {
    // H = [[0, l], [l, 0]]: a particle starting on site 1 stays with probability cos^2(l t).
    const double lambda = 1.0;
    const auto h = build_hopping(2, lambda);
    for (double t : {0.1, 0.7, 2.0, 5.3}) {
        const auto p = unitary_propagator(h, t);
        const CVector psi = p.entries.col(0);
        EXPECT_NEAR(std::norm(psi(0)), std::pow(std::cos(lambda * t), 2), 1e-13);
    }
}

TEST(UnitaryPropagator, IsUnitary) {
    for (int L : {4, 16, 64}) {
        const auto p = unitary_propagator(build_hopping(L), 0.05);
        EXPECT_LT(max_abs(p.entries.adjoint() * p.entries - CMatrix::Identity(L, L)), 1e-12);
    }
}

TEST(UnitaryPropagator, CommutesWithTranslation) {
    for (int L : {4, 8, 18}) {
        for (double dt : {0.05, 0.3}) {
            CMatrix shift = CMatrix::Zero(L, L);
            for (int j = 0; j < L; ++j) shift((j + 1) % L, j) = 1.0;
            const auto p = unitary_propagator(build_hopping(L, 0.8), dt);
            EXPECT_LT(max_abs(p.entries * shift - shift * p.entries), 1e-10);
        }
    }
}

TEST(UnitaryPropagator, RepeatedApplicationPreservesNorm) {
    const int L = 8;
    const double lambda = 1.0;
    const double dt = 0.05;
    const auto p = unitary_propagator(build_hopping(L, lambda), dt);
    CVector v = monfermi::testing::random_complex(L, 1, 3).col(0);
    const double n0 = v.norm();
    const long reps = L * static_cast<long>(std::ceil(2 * std::numbers::pi / (lambda * dt)));
    for (long k = 0; k < reps; ++k) v = p.entries * v;
    EXPECT_NEAR(v.norm(), n0, 1e-8 * n0);
}

TEST(QjEffectivePropagator, ZeroRateMatchesUnitary) {
    const auto h = build_hopping(8);
    EXPECT_EQ(max_abs(qj_effective_propagator(h, 0.0, 0.02).entries - unitary_propagator(h, 0.02).entries), 0.0);
}

TEST(QjEffectivePropagator, ZeroHamiltonianIsScalarDecay) {
    const auto p = qj_effective_propagator(build_hopping(4, 0.0), 2.0 / 3.0, 1.0);
    EXPECT_LT(max_abs(p.entries - std::exp(-1.0) * CMatrix::Identity(4, 4)), 1e-15);
}

TEST(QjEffectivePropagator, ProportionalToUnitary) {
    for (double gamma : {0.1, 0.5, 2.0}) {
        const auto p = qj_effective_propagator(build_hopping(12), gamma, 0.03);
        const CMatrix u = p.entries / std::exp(-1.5 * gamma * 0.03);
        EXPECT_LT(max_abs(u.adjoint() * u - CMatrix::Identity(12, 12)), 1e-12);
    }
}

TEST(QjEffectivePropagator, ScalarDropsOutAfterRenormalization) {
    const auto h = build_hopping(10);
    const auto pu = unitary_propagator(h, 0.04);
    const auto pe = qj_effective_propagator(h, 0.9, 0.04);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = monfermi::testing::random_slater(10, 5, seed);
        const auto a = renormalize(pu.entries * s.amplitudes);
        const auto b = renormalize(pe.entries * s.amplitudes);
        EXPECT_LT(max_abs(a.amplitudes - b.amplitudes), 1e-12);
    }
}
