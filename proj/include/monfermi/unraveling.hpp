#pragma once

// One-step updates and full trajectories for the two unravelings of the
// dephasing Lindbladian: quantum-state diffusion (QSD) and quantum jumps (QJ).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "monfermi/lattice.hpp"
#include "monfermi/noise.hpp"
#include "monfermi/slater.hpp"
#include "monfermi/stats.hpp"

namespace monfermi {

enum class Unraveling { qsd, qj };

inline const char* to_string(Unraveling u) { return u == Unraveling::qsd ? "qsd" : "qj"; }

inline Unraveling parse_unraveling(const std::string& s) {
    if (s == "qsd") return Unraveling::qsd;
    if (s == "qj") return Unraveling::qj;
    throw std::invalid_argument("unknown unraveling '" + s + "' (expected qsd or qj)");
}

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class EventKind { jump, no_jump, qsd };

/// `site` is 0-based and present only for jumps.
struct StepEvent {
    EventKind kind = EventKind::qsd;
    std::optional<int> site;
    std::int64_t step_index = 0;

    bool operator==(const StepEvent&) const = default;
};

/// Jump probability per site, gamma (1 + 3 n_l) dt.
inline RVector jump_probabilities(const RVector& occ, double gamma, double dt) {
    return (gamma * dt) * (1.0 + 3.0 * occ.array()).matrix();
}

/// Branch selection shared by the Gaussian engine and the Fock oracle: [0, 1)
/// is split into consecutive intervals of length p_l in site order followed by
/// the no-jump remainder. Throws ConfigError if the p_l sum to 1 or more.
inline std::optional<int> select_jump_site(const RVector& occ, double gamma, double dt, double u) {
    const RVector p = jump_probabilities(occ, gamma, dt);
    if (p.sum() >= 1.0) {
        throw ConfigError("quantum-jump step: total jump probability " + std::to_string(p.sum()) +
                          " >= 1; reduce dt");
    }
    double cumulative = 0.0;
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        cumulative += p(l);
        if (u < cumulative) return static_cast<int>(l);
    }
    return std::nullopt;
}

/// Diagonal of the QSD measurement factor,
/// exp(dW_j + (2 n_j - 1) gamma dt), with n_j taken before the step.
inline RVector qsd_measurement_factors(const RVector& occ, const Eigen::VectorXd& increments,
                                       double gamma, double dt) {
    return (increments.array() + (2.0 * occ.array() - 1.0) * gamma * dt).exp().matrix();
}

/// QSD step with explicit Wiener increments (variance gamma dt each).
inline SlaterState qsd_step(const SlaterState& s, const Propagator& prop, double gamma, double dt,
                            const Eigen::VectorXd& increments, std::int64_t step = -1) {
    const RVector m = qsd_measurement_factors(occupations(s), increments, gamma, dt);
    CMatrix v = prop.entries * s.amplitudes;
    v = m.asDiagonal() * v;
    return renormalize(std::move(v), step);
}

/// QSD step drawing its increments from `ns` after reading the occupations.
inline SlaterState qsd_step(const SlaterState& s, const Propagator& prop, double gamma, double dt,
                            NoiseStream& ns, std::int64_t step = -1) {
    const RVector occ = occupations(s);
    const Eigen::VectorXd dw = gaussian_increments(ns, s.sites(), gamma * dt);
    const RVector m = qsd_measurement_factors(occ, dw, gamma, dt);
    CMatrix v = m.asDiagonal() * (prop.entries * s.amplitudes);
    return renormalize(std::move(v), step);
}

/// Applies m_l = 1 + n_l on site `site`: row `site` of U is doubled.
inline CMatrix apply_jump(const CMatrix& u, int site) {
    CMatrix v = u;
    v.row(site) *= 2.0;
    return v;
}

struct StepResult {
    SlaterState state;
    StepEvent event;
};

/// QJ step with an explicit uniform draw u in [0, 1).
inline StepResult qj_step(const SlaterState& s, const Propagator& prop_eff, double gamma, double dt,
                          double u, std::int64_t step = -1) {
    const std::optional<int> site = select_jump_site(occupations(s), gamma, dt, u);
    if (site) {
        return {renormalize(apply_jump(s.amplitudes, *site), step),
                {EventKind::jump, site, step}};
    }
    return {renormalize(prop_eff.entries * s.amplitudes, step),
            {EventKind::no_jump, std::nullopt, step}};
}

inline StepResult qj_step(const SlaterState& s, const Propagator& prop_eff, double gamma, double dt,
                          NoiseStream& ns, std::int64_t step = -1) {
    return qj_step(s, prop_eff, gamma, dt, ns.uniform(), step);
}

struct TrajectoryConfig {
    int sites = 16;
    double gamma = 0.1;
    double dt = 0.05;
    double t_final = 400.0;
    double burn_in = 80.0;
    double sample_every = 1.0;
    Unraveling unraveling = Unraveling::qsd;
    double lambda = 1.0;
    int bins = kDefaultBins;
    bool record_entropy = false;
    int entropy_cut = 0;  // 0 means L/2
    // QJ only: integrate no-jump stretches in the eigenbasis of H instead of
    // one dense multiply per step. Same branch logic and noise consumption.
    bool qj_fast = true;

    static double default_dt(Unraveling u, int sites) {
        return u == Unraveling::qsd ? 0.05 : 0.16 / sites;
    }

    /// Defaults: dt per unraveling, burn-in 20% of t_final, sampling every 1.0.
    static TrajectoryConfig make(int sites, double gamma, Unraveling u, double t_final) {
        TrajectoryConfig c;
        c.sites = sites;
        c.gamma = gamma;
        c.unraveling = u;
        c.t_final = t_final;
        c.dt = default_dt(u, sites);
        c.burn_in = 0.2 * t_final;
        c.sample_every = 1.0;
        return c;
    }

    std::int64_t total_steps() const { return std::llround(t_final / dt); }
    std::int64_t burn_in_steps() const { return std::llround(burn_in / dt); }
    std::int64_t sample_stride() const {
        return std::max<std::int64_t>(1, std::llround(sample_every / dt));
    }
    bool is_sample_step(std::int64_t k) const {
        return k >= burn_in_steps() && (k - burn_in_steps()) % sample_stride() == 0;
    }
    int half_cut() const { return entropy_cut > 0 ? entropy_cut : sites / 2; }

    /// Exact total jump probability per QJ step, gamma dt (L + 3N) at half filling.
    double qj_total_jump_probability() const { return gamma * dt * (sites + 1.5 * sites); }
    /// The looser bound gamma dt * 4L assuming <m^2> = 4 on every site.
    double qj_worst_case_bound() const { return 4.0 * gamma * sites * dt; }

    void validate() const {
        if (sites < 2 || sites % 2 != 0) throw ConfigError("L must be even and >= 2");
        if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
        if (!(t_final > 0.0)) throw ConfigError("t_final must be > 0");
        if (!(burn_in >= 0.0 && burn_in < t_final)) throw ConfigError("burn_in must lie in [0, t_final)");
        if (!(sample_every > 0.0)) throw ConfigError("sample_every must be > 0");
        if (bins < 1) throw ConfigError("bins must be >= 1");
        if (entropy_cut < 0 || entropy_cut > sites) throw ConfigError("entropy cut out of range");
        if (unraveling == Unraveling::qj && qj_total_jump_probability() >= 1.0) {
            throw ConfigError("QJ total jump probability gamma*dt*(L+3N) = " +
                              std::to_string(qj_total_jump_probability()) + " >= 1; reduce dt");
        }
    }
};

struct TrajectoryRecord {
    Histogram histogram{kDefaultBins};
    std::int64_t samples = 0;
    std::int64_t steps = 0;
    double ipr_mean = 0.0;         // time average of ipr_instant over samples
    double entropy_mean = 0.0;     // time average of the cut entropy, if recorded
    std::vector<double> entropy_series;
    RVector occupation_profile;    // time-averaged n_j
    std::vector<std::int64_t> jumps_per_site;  // QJ only
    std::int64_t jumps = 0;
    std::int64_t no_jumps = 0;
    double max_number_error = 0.0;           // max |sum_j n_j - N| over samples
    double max_orthonormality_error = 0.0;   // max |U^dag U - I| over samples

    /// Time average of n_j over the sites initially empty (odd in 1-based labels).
    double empty_sublattice_mean() const {
        double s = 0.0;
        for (Eigen::Index j = 0; j < occupation_profile.size(); j += 2) s += occupation_profile(j);
        return s / static_cast<double>((occupation_profile.size() + 1) / 2);
    }
};

class TrajectoryError : public std::runtime_error {
public:
    TrajectoryError(const std::string& what, std::uint64_t trajectory, std::int64_t step)
        : std::runtime_error(what), trajectory_(trajectory), step_(step) {}
    std::uint64_t trajectory() const { return trajectory_; }
    std::int64_t step() const { return step_; }

private:
    std::uint64_t trajectory_;
    std::int64_t step_;
};

namespace detail {

class Sampler {
public:
    Sampler(const TrajectoryConfig& cfg, TrajectoryRecord& rec) : cfg_(cfg), rec_(rec) {
        rec_.histogram = Histogram(cfg.bins);
        rec_.occupation_profile = RVector::Zero(cfg.sites);
    }

    void operator()(const SlaterState& s) {
        const RVector occ = occupations(s);
        rec_.histogram.add_all(occ);
        rec_.occupation_profile += occ;
        ipr_sum_ += ipr_instant(s);
        if (cfg_.record_entropy) {
            const double e = entanglement_entropy(s, cfg_.half_cut());
            rec_.entropy_series.push_back(e);
            entropy_sum_ += e;
        }
        rec_.max_number_error =
            std::max(rec_.max_number_error, std::abs(occ.sum() - s.particles()));
        rec_.max_orthonormality_error =
            std::max(rec_.max_orthonormality_error, orthonormality_error(s));
        ++rec_.samples;
    }

    void finish() {
        if (rec_.samples > 0) {
            const double n = static_cast<double>(rec_.samples);
            rec_.ipr_mean = ipr_sum_ / n;
            rec_.entropy_mean = entropy_sum_ / n;
            rec_.occupation_profile /= n;
        }
    }

private:
    const TrajectoryConfig& cfg_;
    TrajectoryRecord& rec_;
    double ipr_sum_ = 0.0;
    double entropy_sum_ = 0.0;
};

// QJ state held as W = V^dag U in the eigenbasis of H. No-jump steps only
// accumulate a step count; the phases are applied when U is next needed.
class EigenbasisQj {
public:
    EigenbasisQj(const SpectralDecomposition& spec, double dt, const SlaterState& s0)
        : vectors_(spec.vectors), energies_(spec.values), dt_(dt) {
        w_ = vectors_.adjoint() * s0.amplitudes;
        site_.amplitudes = s0.amplitudes;
    }

    void idle() {
        ++pending_;
        site_valid_ = false;
    }

    const SlaterState& state() {
        if (!site_valid_) {
            flush();
            site_.amplitudes = vectors_ * w_;
            site_valid_ = true;
        }
        return site_;
    }

    // The jump acts as W + v_l (row l of U) with v_l = V^dag e_l; QR in the
    // eigenbasis gives the same orthonormal columns (up to phases) as QR in the
    // site basis because V is unitary.
    void jump(int site, std::int64_t step) {
        const SlaterState& u = state();
        CMatrix updated = w_ + vectors_.row(site).adjoint() * u.amplitudes.row(site);
        w_ = renormalize(std::move(updated), step).amplitudes;
        site_valid_ = false;
    }

private:
    void flush() {
        if (pending_ == 0) return;
        const double t = dt_ * static_cast<double>(pending_);
        for (Eigen::Index k = 0; k < energies_.size(); ++k) {
            w_.row(k) *= std::polar(1.0, -energies_(k) * t);
        }
        pending_ = 0;
    }

    CMatrix vectors_;
    RVector energies_;
    double dt_;
    CMatrix w_;
    SlaterState site_;
    bool site_valid_ = true;
    std::int64_t pending_ = 0;
};

}  // namespace detail

/// Evolves the Neel state to t_final under `cfg`, sampling every
/// `sample_every` after the burn-in. Step failures are rethrown as
/// TrajectoryError carrying the trajectory index and step.
inline TrajectoryRecord run_trajectory(const TrajectoryConfig& cfg, std::uint64_t master_seed,
                                       std::uint64_t trajectory_index, std::uint64_t cell_id = 0) {
    cfg.validate();
    NoiseStream ns(master_seed, trajectory_index, cell_id);
    const HoppingMatrix h = build_hopping(cfg.sites, cfg.lambda);
    const SpectralDecomposition spec = spectral_decompose(h);

    TrajectoryRecord rec;
    detail::Sampler sample(cfg, rec);
    const std::int64_t total = cfg.total_steps();
    rec.steps = total;
    std::int64_t k = 0;
    try {
        if (cfg.unraveling == Unraveling::qsd) {
            const Propagator prop = unitary_propagator(spec, cfg.dt);
            SlaterState s = neel_state(cfg.sites);
            for (k = 0; k < total; ++k) {
                if (cfg.is_sample_step(k)) sample(s);
                s = qsd_step(s, prop, cfg.gamma, cfg.dt, ns, k);
            }
            if (cfg.is_sample_step(total)) sample(s);
        } else {
            rec.jumps_per_site.assign(static_cast<std::size_t>(cfg.sites), 0);
            auto count_event = [&](const std::optional<int>& site) {
                if (site) {
                    ++rec.jumps;
                    ++rec.jumps_per_site[static_cast<std::size_t>(*site)];
                } else {
                    ++rec.no_jumps;
                }
            };
            if (cfg.qj_fast) {
                detail::EigenbasisQj evo(spec, cfg.dt, neel_state(cfg.sites));
                // Particle number is conserved, so the jump branch has the same
                // total weight at every step and only needs the state when hit.
                const double p_total = cfg.qj_total_jump_probability();
                for (k = 0; k < total; ++k) {
                    if (cfg.is_sample_step(k)) sample(evo.state());
                    const double u = ns.uniform();
                    std::optional<int> site;
                    if (u < p_total) {
                        site = select_jump_site(occupations(evo.state()), cfg.gamma, cfg.dt, u);
                    }
                    if (site) {
                        evo.jump(*site, k);
                    } else {
                        evo.idle();
                    }
                    count_event(site);
                }
                if (cfg.is_sample_step(total)) sample(evo.state());
            } else {
                const Propagator prop = qj_effective_propagator(spec, cfg.gamma, cfg.dt);
                SlaterState s = neel_state(cfg.sites);
                for (k = 0; k < total; ++k) {
                    if (cfg.is_sample_step(k)) sample(s);
                    StepResult r = qj_step(s, prop, cfg.gamma, cfg.dt, ns, k);
                    s = std::move(r.state);
                    count_event(r.event.site);
                }
                if (cfg.is_sample_step(total)) sample(s);
            }
        }
    } catch (const std::exception& e) {
        throw TrajectoryError(std::string("trajectory ") + std::to_string(trajectory_index) +
                                  " (seed " + std::to_string(master_seed) + ", cell " +
                                  std::to_string(cell_id) + ") failed at step " +
                                  std::to_string(k) + ": " + e.what(),
                              trajectory_index, k);
    }
    sample.finish();
    return rec;
}

}  // namespace monfermi
