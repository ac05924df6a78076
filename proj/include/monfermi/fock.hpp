#pragma once

// Exact many-body reference for small chains in the fixed-particle-number Fock
// basis. It consumes the same NoiseStream draws in the same order as the
// Slater-determinant engine so the two can be compared step by step.
//
// Conventions: site j (0-based) is bit j of a configuration, and a basis state
// is prod_{j ascending} (c_j^dagger)^{n_j} |vacuum>. This Jordan-Wigner order
// fixes every fermionic sign below.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "monfermi/lattice.hpp"
#include "monfermi/noise.hpp"
#include "monfermi/slater.hpp"
#include "monfermi/unraveling.hpp"

namespace monfermi::fock {

using Config = std::uint32_t;

inline constexpr int kMaxSites = 14;
inline constexpr std::int64_t kMaxDimension = 10000;

inline std::int64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

class FockBasis {
public:
    /// Any ordering of the configurations with `particles` bits set among
    /// `sites` bits; every such configuration must appear exactly once.
    FockBasis(int sites, int particles, std::vector<Config> states)
        : sites_(sites), particles_(particles), states_(std::move(states)),
          index_(std::size_t{1} << sites, -1) {
        if (static_cast<std::int64_t>(states_.size()) != binomial(sites, particles)) {
            throw std::invalid_argument("FockBasis: wrong number of configurations");
        }
        for (std::size_t i = 0; i < states_.size(); ++i) {
            const Config c = states_[i];
            if (c >= (Config{1} << sites) || std::popcount(c) != particles || index_[c] != -1) {
                throw std::invalid_argument("FockBasis: invalid or repeated configuration");
            }
            index_[c] = static_cast<std::int32_t>(i);
        }
    }

    int sites() const { return sites_; }
    int particles() const { return particles_; }
    std::int64_t size() const { return static_cast<std::int64_t>(states_.size()); }
    Config configuration(std::int64_t i) const { return states_[static_cast<std::size_t>(i)]; }
    std::int64_t index(Config c) const { return index_[c]; }
    const std::vector<Config>& states() const { return states_; }

private:
    int sites_;
    int particles_;
    std::vector<Config> states_;
    std::vector<std::int32_t> index_;
};

/// Configurations in increasing integer order.
inline FockBasis build_basis(int sites, int particles) {
    if (sites < 1 || sites > kMaxSites) {
        throw std::invalid_argument("build_basis: sites must be in [1, " +
                                    std::to_string(kMaxSites) + "]");
    }
    if (particles < 0 || particles > sites) {
        throw std::invalid_argument("build_basis: particle number out of range");
    }
    if (binomial(sites, particles) > kMaxDimension) {
        throw std::invalid_argument("build_basis: dimension " +
                                    std::to_string(binomial(sites, particles)) +
                                    " exceeds cap " + std::to_string(kMaxDimension));
    }
    std::vector<Config> states;
    for (Config c = 0; c < (Config{1} << sites); ++c) {
        if (std::popcount(c) == particles) states.push_back(c);
    }
    return FockBasis(sites, particles, std::move(states));
}

inline bool occupied(Config c, int site) { return (c >> site) & 1u; }

/// Sign and target of c_i^dagger c_j acting on configuration `c`, or nullopt
/// if the result vanishes.
inline std::optional<std::pair<Config, double>> hop(Config c, int i, int j) {
    if (i == j) {
        if (!occupied(c, j)) return std::nullopt;
        return std::make_pair(c, 1.0);
    }
    if (!occupied(c, j) || occupied(c, i)) return std::nullopt;
    // c_j picks up (-1)^(occupied sites below j); c_i^dagger then picks up
    // (-1)^(occupied sites below i) after removal. Together: the sites strictly
    // between i and j.
    const int lo = std::min(i, j);
    const int hi = std::max(i, j);
    const Config between = (c >> (lo + 1)) & ((Config{1} << (hi - lo - 1)) - 1u);
    const double sign = (std::popcount(between) % 2 == 0) ? 1.0 : -1.0;
    return std::make_pair((c & ~(Config{1} << j)) | (Config{1} << i), sign);
}

/// Matrix of sum_ij H(i, j) c_i^dagger c_j in the basis.
inline CMatrix many_body_matrix(const CMatrix& single, const FockBasis& basis) {
    if (single.rows() != basis.sites() || single.cols() != basis.sites()) {
        throw std::invalid_argument("many_body_matrix: size mismatch");
    }
    const std::int64_t dim = basis.size();
    CMatrix m = CMatrix::Zero(dim, dim);
    for (std::int64_t col = 0; col < dim; ++col) {
        const Config c = basis.configuration(col);
        for (int i = 0; i < basis.sites(); ++i) {
            for (int j = 0; j < basis.sites(); ++j) {
                if (single(i, j) == cplx(0.0)) continue;
                if (auto r = hop(c, i, j)) {
                    m(basis.index(r->first), col) += single(i, j) * r->second;
                }
            }
        }
    }
    return m;
}

inline CMatrix many_body_matrix(const HoppingMatrix& h, const FockBasis& basis) {
    return many_body_matrix(h.entries, basis);
}

struct FockState {
    CVector amplitudes;
};

/// Single configuration state.
inline FockState basis_state(const FockBasis& basis, Config c) {
    FockState s{CVector::Zero(basis.size())};
    const std::int64_t i = basis.index(c);
    if (i < 0) throw std::invalid_argument("basis_state: configuration not in basis");
    s.amplitudes(i) = 1.0;
    return s;
}

/// Even sites (1-based 2, 4, ...) occupied, matching neel_state.
inline FockState neel_state(const FockBasis& basis) {
    Config c = 0;
    for (int j = 1; j < basis.sites(); j += 2) c |= Config{1} << j;
    return basis_state(basis, c);
}

/// Builds the Fock amplitudes of a Slater determinant: the coefficient of a
/// configuration with occupied sites j_1 < ... < j_N is det U[{j}, :].
inline FockState from_slater(const FockBasis& basis, const SlaterState& s) {
    if (s.sites() != basis.sites() || s.particles() != basis.particles()) {
        throw std::invalid_argument("from_slater: size mismatch");
    }
    const int n = basis.particles();
    FockState out{CVector::Zero(basis.size())};
    CMatrix sub(n, n);
    for (std::int64_t i = 0; i < basis.size(); ++i) {
        const Config c = basis.configuration(i);
        int r = 0;
        for (int j = 0; j < basis.sites(); ++j) {
            if (occupied(c, j)) sub.row(r++) = s.amplitudes.row(j);
        }
        out.amplitudes(i) = n == 0 ? cplx(1.0) : sub.determinant();
    }
    return out;
}

inline RVector occupations(const FockBasis& basis, const FockState& psi) {
    RVector n = RVector::Zero(basis.sites());
    for (std::int64_t i = 0; i < basis.size(); ++i) {
        const double w = std::norm(psi.amplitudes(i));
        const Config c = basis.configuration(i);
        for (int j = 0; j < basis.sites(); ++j) {
            if (occupied(c, j)) n(j) += w;
        }
    }
    return n;
}

/// G(i, j) = <c_i^dagger c_j>.
inline CMatrix two_point(const FockBasis& basis, const FockState& psi) {
    const int L = basis.sites();
    CMatrix g = CMatrix::Zero(L, L);
    for (std::int64_t col = 0; col < basis.size(); ++col) {
        const Config c = basis.configuration(col);
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) {
                if (auto r = hop(c, i, j)) {
                    g(i, j) += std::conj(psi.amplitudes(basis.index(r->first))) * r->second *
                               psi.amplitudes(col);
                }
            }
        }
    }
    return g;
}

/// Von Neumann entropy of sites [0, ell) from the exact reduced density matrix.
/// With the site order above, a configuration factorizes as (low bits, high
/// bits) without extra signs, so the amplitudes reshape into a matrix
/// Psi(a, b) and rho_A = Psi Psi^dagger.
inline double entanglement_entropy(const FockBasis& basis, const FockState& psi, int ell) {
    if (ell < 1 || ell > basis.sites()) {
        throw std::invalid_argument("fock entanglement_entropy: subsystem length out of range");
    }
    const Eigen::Index da = Eigen::Index{1} << ell;
    const Eigen::Index db = Eigen::Index{1} << (basis.sites() - ell);
    CMatrix reshaped = CMatrix::Zero(da, db);
    const Config mask = (Config{1} << ell) - 1u;
    for (std::int64_t i = 0; i < basis.size(); ++i) {
        const Config c = basis.configuration(i);
        reshaped(c & mask, c >> ell) = psi.amplitudes(i);
    }
    const CMatrix rho = reshaped * reshaped.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
        const double p = solver.eigenvalues()(k);
        if (p > 1e-300) s -= p * std::log(p);
    }
    return s;
}

inline void normalize(FockState& psi) {
    const double norm = psi.amplitudes.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw std::runtime_error("fock normalize: vanishing or non-finite norm");
    }
    psi.amplitudes /= norm;
}

/// Everything the oracle needs for one (H, dt) configuration: the dense
/// propagator exp(-i H dt) is computed once by eigendecomposition.
struct Oracle {
    FockBasis basis;
    CMatrix hamiltonian;
    CMatrix propagator;
    Eigen::MatrixXd site_occupation;  // (basis index, site) -> 0 or 1

    Oracle(const HoppingMatrix& h, int particles, double dt)
        : basis(build_basis(h.sites, particles)),
          hamiltonian(many_body_matrix(h, basis)) {
        propagator = unitary_propagator(spectral_decompose(hamiltonian), dt).entries;
        site_occupation = Eigen::MatrixXd::Zero(basis.size(), basis.sites());
        for (std::int64_t i = 0; i < basis.size(); ++i) {
            for (int j = 0; j < basis.sites(); ++j) {
                site_occupation(i, j) = occupied(basis.configuration(i), j) ? 1.0 : 0.0;
            }
        }
    }
};

/// exp(-i H dt), then the diagonal exp(sum_j [dW_j + (2 <n_j> - 1) gamma dt] n_j)
/// with <n_j> read before the step, then normalization.
inline FockState oracle_qsd_step(const Oracle& o, const FockState& psi, double gamma, double dt,
                                 const Eigen::VectorXd& increments) {
    const RVector occ = occupations(o.basis, psi);
    const RVector a = (increments.array() + (2.0 * occ.array() - 1.0) * gamma * dt).matrix();
    const Eigen::VectorXd exponent = o.site_occupation * a;
    FockState out{o.propagator * psi.amplitudes};
    out.amplitudes.array() *= exponent.array().exp().cast<cplx>();
    normalize(out);
    return out;
}

inline FockState oracle_qsd_step(const Oracle& o, const FockState& psi, double gamma, double dt,
                                 NoiseStream& ns) {
    const Eigen::VectorXd dw = gaussian_increments(ns, o.basis.sites(), gamma * dt);
    return oracle_qsd_step(o, psi, gamma, dt, dw);
}

struct OracleStepResult {
    FockState state;
    StepEvent event;
};

/// Jump: multiply by (1 + n_l); no jump: exp(-i H dt) exp(-(3/2) gamma N dt).
/// Both are followed by normalization.
inline OracleStepResult oracle_qj_step(const Oracle& o, const FockState& psi, double gamma,
                                       double dt, double u, std::int64_t step = -1) {
    const std::optional<int> site = select_jump_site(occupations(o.basis, psi), gamma, dt, u);
    OracleStepResult r;
    if (site) {
        r.state.amplitudes = psi.amplitudes;
        r.state.amplitudes.array() *= (1.0 + o.site_occupation.col(*site).array()).cast<cplx>();
        r.event = {EventKind::jump, site, step};
    } else {
        const double decay = std::exp(-1.5 * gamma * o.basis.particles() * dt);
        r.state.amplitudes = decay * (o.propagator * psi.amplitudes);
        r.event = {EventKind::no_jump, std::nullopt, step};
    }
    normalize(r.state);
    return r;
}

inline OracleStepResult oracle_qj_step(const Oracle& o, const FockState& psi, double gamma,
                                       double dt, NoiseStream& ns, std::int64_t step = -1) {
    return oracle_qj_step(o, psi, gamma, dt, ns.uniform(), step);
}

}  // namespace monfermi::fock
