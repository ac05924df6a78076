#pragma once

// Slater-determinant trajectory state and its single-trajectory observables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "monfermi/lattice.hpp"

namespace monfermi {

/// L x N matrix of orbital amplitudes; column mu is orbital mu in the site basis.
///
/// The many-body state is prod_mu (sum_j U(j, mu) c_j^dagger) |vacuum>. Columns
/// are kept orthonormal by `renormalize`. No gauge fixing is applied beyond the
/// Householder QR, so gauge-dependent quantities such as `ipr_instant` reflect
/// the columns exactly as the evolution produced them.
struct SlaterState {
    CMatrix amplitudes;

    int sites() const { return static_cast<int>(amplitudes.rows()); }
    int particles() const { return static_cast<int>(amplitudes.cols()); }
};

/// C = U U^dagger. Note <c_i^dagger c_j> = C(j, i).
struct CorrelationMatrix {
    CMatrix entries;
};

class RenormalizationError : public std::runtime_error {
public:
    RenormalizationError(const std::string& what, std::int64_t step)
        : std::runtime_error(what), step_(step) {}

    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

inline constexpr double kRankTolerance = 1e-13;
inline constexpr double kOverflowGuard = 1e100;

/// Half filling with the even sites (1-based 2, 4, ..., L) occupied.
inline SlaterState neel_state(int sites) {
    if (sites < 2 || sites % 2 != 0) {
        throw std::invalid_argument("neel_state: site count must be even and >= 2");
    }
    const int n = sites / 2;
    SlaterState s{CMatrix::Zero(sites, n)};
    for (int mu = 0; mu < n; ++mu) s.amplitudes(2 * mu + 1, mu) = 1.0;
    return s;
}

inline RVector occupations(const SlaterState& s) {
    return s.amplitudes.rowwise().squaredNorm();
}

/// Orthonormalizes the columns of `v` by Householder QR and returns Q1.
///
/// Throws RenormalizationError when a diagonal entry of R1 falls below
/// kRankTolerance in magnitude; `step` is carried along for context.
inline SlaterState renormalize(CMatrix v, std::int64_t step = -1) {
    const Eigen::Index rows = v.rows();
    const Eigen::Index cols = v.cols();
    if (cols > rows) {
        throw RenormalizationError("renormalize: more orbitals than sites", step);
    }
    const double peak = v.cwiseAbs().maxCoeff();
    if (!std::isfinite(peak)) {
        throw RenormalizationError(
            "renormalize: non-finite amplitude at step " + std::to_string(step), step);
    }
    if (peak > kOverflowGuard) {
        // Largest column norm, taken after a first scaling by the peak so the
        // squared norms cannot overflow.
        // Multiplying by the reciprocal keeps Eigen off complex division.
        v *= 1.0 / peak;
        v *= 1.0 / v.colwise().norm().maxCoeff();
    }

    Eigen::HouseholderQR<CMatrix> qr(v);
    const auto diag = qr.matrixQR().diagonal();
    for (Eigen::Index k = 0; k < cols; ++k) {
        if (std::abs(diag(k)) < kRankTolerance) {
            throw RenormalizationError("renormalize: rank deficient at step " +
                                           std::to_string(step) + " (column " +
                                           std::to_string(k) + ")",
                                       step);
        }
    }
    SlaterState out;
    out.amplitudes = qr.householderQ() * CMatrix::Identity(rows, cols);
    return out;
}

inline CorrelationMatrix correlation_matrix(const SlaterState& s) {
    return {s.amplitudes * s.amplitudes.adjoint()};
}

/// Binary entropy -x ln x - (1-x) ln(1-x), with 0 ln 0 = 0.
inline double binary_entropy(double x) {
    x = std::clamp(x, 0.0, 1.0);
    double h = 0.0;
    if (x > 0.0) h -= x * std::log(x);
    if (x < 1.0) h -= (1.0 - x) * std::log1p(-x);
    return h;
}

/// Von Neumann entropy (natural log) of the first `ell` contiguous sites.
inline double entanglement_entropy(const SlaterState& s, int ell) {
    if (ell < 1 || ell > s.sites()) {
        throw std::invalid_argument("entanglement_entropy: subsystem length out of range");
    }
    // Spectrum of C restricted to the block equals the squared singular values
    // of the block's rows; using the ell x ell Gram form keeps it Hermitian.
    const auto block = s.amplitudes.topRows(ell);
    const CMatrix restricted = block * block.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(restricted, Eigen::EigenvaluesOnly);
    double total = 0.0;
    for (Eigen::Index a = 0; a < solver.eigenvalues().size(); ++a) {
        total += binary_entropy(solver.eigenvalues()(a));
    }
    return total;
}

/// (2/L) sum_mu sum_j |U(j, mu)|^4, evaluated on the columns as stored.
inline double ipr_instant(const SlaterState& s) {
    if (2 * s.particles() != s.sites()) {
        throw std::invalid_argument("ipr_instant: requires half filling (N = L/2)");
    }
    return 2.0 / s.sites() * s.amplitudes.cwiseAbs2().cwiseAbs2().sum();
}

/// max |U^dagger U - I| entrywise.
inline double orthonormality_error(const SlaterState& s) {
    const Eigen::Index n = s.amplitudes.cols();
    return (s.amplitudes.adjoint() * s.amplitudes - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
}

}  // namespace monfermi
