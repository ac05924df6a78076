#pragma once

// Single-particle tight-binding chain with periodic closure, its spectral
// decomposition, and the one-step propagators shared by both unravelings.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace monfermi {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Nearest-neighbour hopping matrix of a ring of `sites` sites.
///
/// Entry (i, j) is lambda/2 whenever |i - j| = 1 mod L. At L = 2 the bond and
/// its periodic image coincide, so both contributions add up to lambda.
struct HoppingMatrix {
    int sites = 0;
    double lambda = 1.0;
    CMatrix entries;
};

inline HoppingMatrix build_hopping(int sites, double lambda = 1.0) {
    if (sites < 2 || sites % 2 != 0) {
        throw std::invalid_argument("build_hopping: site count must be even and >= 2, got " +
                                    std::to_string(sites));
    }
    HoppingMatrix h{sites, lambda, CMatrix::Zero(sites, sites)};
    for (int i = 0; i < sites; ++i) {
        const int j = (i + 1) % sites;
        h.entries(i, j) += lambda / 2.0;
        h.entries(j, i) += lambda / 2.0;
    }
    return h;
}

/// H = vectors * diag(values) * vectors^dagger, values ascending.
struct SpectralDecomposition {
    RVector values;
    CMatrix vectors;
};

inline SpectralDecomposition spectral_decompose(const CMatrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("spectral_decompose: eigensolver did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

inline SpectralDecomposition spectral_decompose(const HoppingMatrix& h) {
    return spectral_decompose(h.entries);
}

enum class PropagatorKind { unitary, qj_effective };

struct Propagator {
    CMatrix entries;
    double dt = 0.0;
    PropagatorKind kind = PropagatorKind::unitary;
    double gamma = 0.0;  // only meaningful for qj_effective

    /// exp(-3 gamma dt / 2) for the effective kind, 1 otherwise.
    double decay() const {
        return kind == PropagatorKind::qj_effective ? std::exp(-1.5 * gamma * dt) : 1.0;
    }
};

/// exp(-i H dt) from a precomputed decomposition.
inline Propagator unitary_propagator(const SpectralDecomposition& spec, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("unitary_propagator: dt must be positive");
    }
    const CVector phases =
        (spec.values.cast<cplx>() * cplx(0.0, -dt)).array().exp().matrix();
    Propagator p;
    p.entries = spec.vectors * phases.asDiagonal() * spec.vectors.adjoint();
    p.dt = dt;
    return p;
}

inline Propagator unitary_propagator(const HoppingMatrix& h, double dt) {
    return unitary_propagator(spectral_decompose(h), dt);
}

/// exp(-i H_eff dt) with H_eff = H - (3/2) i gamma * identity.
///
/// The anti-Hermitian part is proportional to the identity, so the result is the
/// unitary propagator times exp(-3 gamma dt / 2). The scalar drops out after QR
/// renormalization; it is kept so the matrix is the literal non-Hermitian step.
inline Propagator qj_effective_propagator(const SpectralDecomposition& spec, double gamma,
                                          double dt) {
    if (gamma < 0.0) {
        throw std::invalid_argument("qj_effective_propagator: gamma must be >= 0");
    }
    Propagator p = unitary_propagator(spec, dt);
    p.kind = PropagatorKind::qj_effective;
    p.gamma = gamma;
    p.entries *= p.decay();
    return p;
}

inline Propagator qj_effective_propagator(const HoppingMatrix& h, double gamma, double dt) {
    return qj_effective_propagator(spectral_decompose(h), gamma, dt);
}

}  // namespace monfermi
