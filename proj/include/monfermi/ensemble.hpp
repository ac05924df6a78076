#pragma once

// Ensemble orchestration: a grid of (unraveling, gamma, L) cells, each run for
// a fixed number of independently seeded trajectories on a worker pool, then
// merged and summarized. Results do not depend on the worker count because
// every trajectory owns its state and noise and merging follows index order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "monfermi/stats.hpp"
#include "monfermi/unraveling.hpp"

namespace monfermi {

struct RunConfig {
    std::vector<Unraveling> unravelings{Unraveling::qsd};
    std::vector<double> gammas{0.1};
    std::vector<int> sizes{16};
    double lambda = 1.0;
    std::optional<double> dt;       // default per unraveling and L
    double t_final = 400.0;
    std::optional<double> burn_in;  // default 0.2 * t_final
    double sample_every = 1.0;
    int trajectories = 80;
    std::uint64_t master_seed = 1;
    int workers = 0;                // 0: hardware concurrency
    int bins = kDefaultBins;
    MaximaOptions maxima;
    bool record_entropy = false;
    bool weighted_fit = false;
    std::string preset = "custom";

    double burn_in_value() const { return burn_in.value_or(0.2 * t_final); }

    TrajectoryConfig trajectory_config(Unraveling u, double gamma, int sites) const {
        TrajectoryConfig c = TrajectoryConfig::make(sites, gamma, u, t_final);
        if (dt) c.dt = *dt;
        c.burn_in = burn_in_value();
        c.sample_every = sample_every;
        c.lambda = lambda;
        c.bins = bins;
        c.record_entropy = record_entropy;
        return c;
    }

    void validate() const {
        if (trajectories < 1) throw ConfigError("trajectories must be >= 1");
        if (unravelings.empty() || gammas.empty() || sizes.empty()) {
            throw ConfigError("unraveling, gamma and L lists must be non-empty");
        }
        if (workers < 0) throw ConfigError("workers must be >= 0");
        for (double g : gammas) {
            if (!(g >= 0.0)) throw ConfigError("all gamma must be >= 0");
        }
        for (auto u : unravelings) {
            for (double g : gammas) {
                for (int l : sizes) trajectory_config(u, g, l).validate();
            }
        }
    }
};

/// Injective packing of a cell into 64 bits: unraveling (1 bit), L (< 2^23),
/// gamma in units of 1e-6 (< 2^40). Distinct gammas must differ at that resolution.
inline std::uint64_t cell_id(Unraveling u, double gamma, int sites) {
    const auto micro = static_cast<std::uint64_t>(std::llround(gamma * 1e6));
    if (sites < 0 || sites >= (1 << 23) || micro >= (std::uint64_t{1} << 40)) {
        throw ConfigError("cell outside the seed-derivation range");
    }
    return (std::uint64_t{u == Unraveling::qj} << 63) |
           (static_cast<std::uint64_t>(sites) << 40) | micro;
}

struct TrajectoryFailure {
    std::uint64_t index = 0;
    std::string message;
};

struct CellReport {
    Unraveling unraveling = Unraveling::qsd;
    double gamma = 0.0;
    int sites = 0;
    double dt = 0.0;
    std::uint64_t cell = 0;
    int trajectories = 0;  // completed
    Histogram histogram;
    MaximaReport maxima;
    MeanStderr n_binned;       // per-trajectory binned means of the histogram
    MeanStderr n_empty_sublattice;  // per-trajectory time average on initially empty sites
    MeanStderr ipr;
    std::optional<MeanStderr> entropy;
    double mirror_ks = 0.0;    // KS distance between P(n) and P(1 - n)
    std::optional<double> jump_rate_per_site;  // QJ: jumps / (L * t_final), averaged
    double max_number_error = 0.0;
    double max_orthonormality_error = 0.0;
    std::vector<TrajectoryFailure> failures;
};

struct ScalingReport {
    Unraveling unraveling = Unraveling::qsd;
    double gamma = 0.0;
    PowerLawFit fit;
};

struct BifurcationReport {
    Unraveling unraveling = Unraveling::qsd;
    int sites = 0;
    BifurcationEstimate estimate;
};

struct EnsembleReport {
    RunConfig config;
    std::vector<CellReport> cells;
    std::vector<ScalingReport> scaling;
    std::vector<BifurcationReport> bifurcations;

    const CellReport& cell(Unraveling u, double gamma, int sites) const {
        for (const auto& c : cells) {
            if (c.unraveling == u && c.sites == sites && std::abs(c.gamma - gamma) < 1e-12) return c;
        }
        throw std::out_of_range("EnsembleReport: no such cell");
    }
};

class EnsembleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Worker count after applying the MONFERMI_THREADS cap.
inline int effective_workers(int requested, std::size_t jobs) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MONFERMI_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    n = std::max(n, 1);
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

/// Runs `count` jobs on a bounded pool; job(i) must only touch slot i.
template <class Job>
void parallel_for(std::size_t count, int workers, Job&& job) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) job(i);
    };
    if (workers <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
}

namespace detail {

inline CellReport summarize_cell(const RunConfig& cfg, Unraveling u, double gamma, int sites,
                                 const std::vector<std::optional<TrajectoryRecord>>& records,
                                 std::vector<TrajectoryFailure> failures) {
    const TrajectoryConfig tc = cfg.trajectory_config(u, gamma, sites);
    CellReport c;
    c.unraveling = u;
    c.gamma = gamma;
    c.sites = sites;
    c.dt = tc.dt;
    c.cell = cell_id(u, gamma, sites);
    c.histogram = Histogram(cfg.bins);
    c.failures = std::move(failures);

    std::vector<double> n_binned, n_empty, ipr, entropy, rate;
    for (const auto& r : records) {
        if (!r) continue;
        ++c.trajectories;
        c.histogram = merge(c.histogram, r->histogram);
        if (r->samples > 0) {
            n_binned.push_back(r->histogram.binned_mean());
            n_empty.push_back(r->empty_sublattice_mean());
            ipr.push_back(r->ipr_mean);
            if (tc.record_entropy) entropy.push_back(r->entropy_mean);
        }
        if (u == Unraveling::qj) {
            rate.push_back(static_cast<double>(r->jumps) / (sites * tc.total_steps() * tc.dt));
        }
        c.max_number_error = std::max(c.max_number_error, r->max_number_error);
        c.max_orthonormality_error = std::max(c.max_orthonormality_error, r->max_orthonormality_error);
    }
    c.n_binned = mean_stderr(n_binned);
    c.n_empty_sublattice = mean_stderr(n_empty);
    c.ipr = mean_stderr(ipr);
    if (tc.record_entropy) c.entropy = mean_stderr(entropy);
    if (u == Unraveling::qj && !rate.empty()) c.jump_rate_per_site = mean_stderr(rate).mean;
    if (c.histogram.total() > 0) {
        c.maxima = find_maxima(c.histogram, cfg.maxima);
        c.mirror_ks = ks_distance(c.histogram, c.histogram.mirrored());
    }
    return c;
}

}  // namespace detail

/// Executes every (unraveling, gamma, L) cell and derives fits and
/// bifurcation brackets. Trajectory i of a cell uses the stream
/// (master_seed, i, cell_id(cell)). Throws EnsembleError if more than 10% of
/// all trajectories fail; fewer failures are recorded in the cell reports.
inline EnsembleReport run_ensemble(const RunConfig& cfg) {
    cfg.validate();

    struct Cell {
        Unraveling u;
        double gamma;
        int sites;
    };
    std::vector<Cell> cells;
    for (auto u : cfg.unravelings) {
        for (double g : cfg.gammas) {
            for (int l : cfg.sizes) cells.push_back({u, g, l});
        }
    }
    {
        std::vector<std::uint64_t> ids;
        for (const auto& c : cells) ids.push_back(cell_id(c.u, c.gamma, c.sites));
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw ConfigError("duplicate cells (gamma values must differ by at least 1e-6)");
        }
    }

    const std::size_t per_cell = static_cast<std::size_t>(cfg.trajectories);
    const std::size_t jobs = cells.size() * per_cell;
    std::vector<std::optional<TrajectoryRecord>> records(jobs);
    std::vector<std::string> errors(jobs);

    parallel_for(jobs, effective_workers(cfg.workers, jobs), [&](std::size_t i) {
        const Cell& c = cells[i / per_cell];
        const std::uint64_t idx = i % per_cell;
        try {
            records[i] = run_trajectory(cfg.trajectory_config(c.u, c.gamma, c.sites), cfg.master_seed,
                                        idx, cell_id(c.u, c.gamma, c.sites));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::size_t failed = 0;
    for (const auto& e : errors) failed += e.empty() ? 0 : 1;
    if (failed * 10 > jobs) {
        std::string first;
        for (const auto& e : errors) {
            if (!e.empty()) {
                first = e;
                break;
            }
        }
        throw EnsembleError(std::to_string(failed) + " of " + std::to_string(jobs) +
                            " trajectories failed; first: " + first);
    }

    EnsembleReport report;
    report.config = cfg;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        std::vector<std::optional<TrajectoryRecord>> slice(
            std::make_move_iterator(records.begin() + ci * per_cell),
            std::make_move_iterator(records.begin() + (ci + 1) * per_cell));
        std::vector<TrajectoryFailure> fails;
        for (std::size_t k = 0; k < per_cell; ++k) {
            if (!errors[ci * per_cell + k].empty()) fails.push_back({k, errors[ci * per_cell + k]});
        }
        const Cell& c = cells[ci];
        report.cells.push_back(
            detail::summarize_cell(cfg, c.u, c.gamma, c.sites, slice, std::move(fails)));
    }

    std::vector<int> sizes = cfg.sizes;
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    std::vector<double> gammas = cfg.gammas;
    std::sort(gammas.begin(), gammas.end());

    for (auto u : cfg.unravelings) {
        if (sizes.size() >= 3) {
            for (double g : gammas) {
                std::vector<PowerLawPoint> pts;
                for (int l : sizes) {
                    const CellReport& c = report.cell(u, g, l);
                    if (c.ipr.count > 0) pts.push_back({static_cast<double>(l), c.ipr.mean, c.ipr.std_error});
                }
                if (pts.size() >= 3) report.scaling.push_back({u, g, fit_power_law(pts, cfg.weighted_fit)});
            }
        }
        if (gammas.size() >= 2) {
            for (int l : sizes) {
                std::vector<std::pair<double, MaximaReport>> scan;
                for (double g : gammas) {
                    const CellReport& c = report.cell(u, g, l);
                    if (c.histogram.total() > 0) scan.emplace_back(g, c.maxima);
                }
                report.bifurcations.push_back({u, l, bifurcation_scan(scan)});
            }
        }
    }
    return report;
}

}  // namespace monfermi
