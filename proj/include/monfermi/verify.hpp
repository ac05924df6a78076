#pragma once

// Step-by-step comparison of the Slater-determinant engine against the exact
// Fock-space oracle, both driven by identically seeded noise streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "monfermi/fock.hpp"
#include "monfermi/lattice.hpp"
#include "monfermi/noise.hpp"
#include "monfermi/slater.hpp"
#include "monfermi/unraveling.hpp"

namespace monfermi {

inline constexpr int kMaxVerifySites = 10;
inline constexpr double kVerifyTolerance = 1e-6;

struct EngineComparison {
    Unraveling unraveling = Unraveling::qsd;
    double max_occupation_deviation = 0.0;
    double max_entropy_deviation = 0.0;
    double max_correlation_deviation = 0.0;  // |<c_i^dag c_j>_Fock - C(j, i)|
    bool events_equal = true;                // QJ only
    std::int64_t jumps = 0;
    std::vector<StepEvent> events;           // Gaussian engine's sequence (QJ)
};

struct VerifyReport {
    int sites = 0;
    double gamma = 0.0;
    double dt = 0.0;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
    EngineComparison qsd;
    EngineComparison qj;

    bool passed(double tolerance = kVerifyTolerance) const {
        auto ok = [&](const EngineComparison& c) {
            return c.max_occupation_deviation < tolerance && c.max_entropy_deviation < tolerance &&
                   c.max_correlation_deviation < tolerance && c.events_equal;
        };
        return ok(qsd) && ok(qj);
    }
};

namespace detail {

inline void compare_states(EngineComparison& cmp, const SlaterState& g, const fock::Oracle& o,
                           const fock::FockState& f) {
    const int ell = g.sites() / 2;
    cmp.max_occupation_deviation =
        std::max(cmp.max_occupation_deviation,
                 (occupations(g) - fock::occupations(o.basis, f)).cwiseAbs().maxCoeff());
    cmp.max_entropy_deviation =
        std::max(cmp.max_entropy_deviation,
                 std::abs(entanglement_entropy(g, ell) - fock::entanglement_entropy(o.basis, f, ell)));
    const CMatrix c = correlation_matrix(g).entries;
    cmp.max_correlation_deviation =
        std::max(cmp.max_correlation_deviation,
                 (fock::two_point(o.basis, f) - c.transpose()).cwiseAbs().maxCoeff());
}

}  // namespace detail

/// Runs `steps` steps of each unraveling on both engines from the Neel state.
/// The QJ side uses the literal per-step update on the Gaussian engine.
inline VerifyReport verify(int sites, double gamma, std::int64_t steps, std::uint64_t seed,
                           std::optional<double> dt_override = std::nullopt, double lambda = 1.0,
                           bool keep_events = false) {
    if (sites < 2 || sites > kMaxVerifySites || sites % 2 != 0) {
        throw ConfigError("verify: L must be even and in [2, " + std::to_string(kMaxVerifySites) + "]");
    }
    if (steps < 0) throw ConfigError("verify: steps must be >= 0");
    VerifyReport rep;
    rep.sites = sites;
    rep.gamma = gamma;
    rep.steps = steps;
    rep.seed = seed;

    const HoppingMatrix h = build_hopping(sites, lambda);
    const SpectralDecomposition spec = spectral_decompose(h);
    const int n = sites / 2;

    {
        const double dt = dt_override.value_or(TrajectoryConfig::default_dt(Unraveling::qsd, sites));
        rep.dt = dt;
        const Propagator prop = unitary_propagator(spec, dt);
        const fock::Oracle oracle(h, n, dt);
        NoiseStream ng(seed, 0), nf(seed, 0);
        SlaterState g = neel_state(sites);
        fock::FockState f = fock::neel_state(oracle.basis);
        rep.qsd.unraveling = Unraveling::qsd;
        detail::compare_states(rep.qsd, g, oracle, f);
        for (std::int64_t k = 0; k < steps; ++k) {
            g = qsd_step(g, prop, gamma, dt, ng, k);
            f = fock::oracle_qsd_step(oracle, f, gamma, dt, nf);
            detail::compare_states(rep.qsd, g, oracle, f);
        }
    }
    {
        const double dt = dt_override.value_or(TrajectoryConfig::default_dt(Unraveling::qj, sites));
        TrajectoryConfig probe = TrajectoryConfig::make(sites, gamma, Unraveling::qj, 1.0);
        probe.dt = dt;
        if (probe.qj_total_jump_probability() >= 1.0) {
            throw ConfigError("verify: QJ jump probability per step >= 1; reduce dt");
        }
        const Propagator prop = qj_effective_propagator(spec, gamma, dt);
        const fock::Oracle oracle(h, n, dt);
        NoiseStream ng(seed, 1), nf(seed, 1);
        SlaterState g = neel_state(sites);
        fock::FockState f = fock::neel_state(oracle.basis);
        rep.qj.unraveling = Unraveling::qj;
        detail::compare_states(rep.qj, g, oracle, f);
        for (std::int64_t k = 0; k < steps; ++k) {
            StepResult rg = qj_step(g, prop, gamma, dt, ng, k);
            fock::OracleStepResult rf = fock::oracle_qj_step(oracle, f, gamma, dt, nf, k);
            if (!(rg.event == rf.event)) rep.qj.events_equal = false;
            if (rg.event.kind == EventKind::jump) ++rep.qj.jumps;
            if (keep_events) rep.qj.events.push_back(rg.event);
            g = std::move(rg.state);
            f = std::move(rf.state);
            detail::compare_states(rep.qj, g, oracle, f);
        }
    }
    return rep;
}

}  // namespace monfermi
