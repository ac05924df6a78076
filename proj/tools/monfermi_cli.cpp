// monfermi: trajectory ensembles of a monitored free-fermion chain.
//
//   monfermi run     ensemble over a (gamma, L) grid, writes CSV + report.json
//   monfermi scan    gamma sweep at fixed L with bifurcation bracketing
//   monfermi ipr     L sweep per gamma with power-law fit of the mean IPR
//   monfermi verify  Slater engine vs exact Fock oracle with shared noise
//
// Exit codes: 0 success, 1 usage error, 2 verification failure, 3 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "monfermi/monfermi.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kVerifyFailed = 2, kRuntime = 3 };

struct EnsembleFlags {
    std::string config_file;
    std::string out = "out";
    // Raw values, applied through io::apply_setting after the config file.
    std::string preset, unraveling, gamma, sizes, trajectories, seed, t_final, dt, burn_in,
        sample_every, lambda, threads, bins, smooth_window, prominence;
    bool entropy = false;
    bool weighted_fit = false;
};

void add_ensemble_flags(CLI::App* cmd, EnsembleFlags& f) {
    cmd->add_option("--config", f.config_file, "Flat key = value config file");
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
    cmd->add_option("--preset", f.preset, "desk | paper");
    cmd->add_option("--unraveling", f.unraveling, "qsd | qj | both");
    cmd->add_option("--gamma", f.gamma, "Measurement rate(s), comma separated");
    cmd->add_option("--L", f.sizes, "Chain length(s), comma separated");
    cmd->add_option("--trajectories", f.trajectories, "Trajectories per cell");
    cmd->add_option("--seed", f.seed, "Master seed");
    cmd->add_option("--t-final", f.t_final, "Final time");
    cmd->add_option("--dt", f.dt, "Time step (default 0.05 for qsd, 0.16/L for qj)");
    cmd->add_option("--burn-in", f.burn_in, "Time discarded before sampling (default 0.2 t-final)");
    cmd->add_option("--sample-every", f.sample_every, "Sampling interval");
    cmd->add_option("--lambda", f.lambda, "Hopping amplitude");
    cmd->add_option("--threads", f.threads, "Worker count (capped by MONFERMI_THREADS)");
    cmd->add_option("--bins", f.bins, "Histogram bins on [0, 1]");
    cmd->add_option("--smooth-window", f.smooth_window, "Moving-average width for maxima (odd)");
    cmd->add_option("--prominence", f.prominence, "Peak prominence as fraction of global peak");
    cmd->add_flag("--entropy", f.entropy, "Record half-chain entanglement entropy");
    cmd->add_flag("--weighted-fit", f.weighted_fit, "Weight the power-law fit by standard errors");
}

monfermi::RunConfig build_config(const EnsembleFlags& f) {
    monfermi::RunConfig cfg;
    if (!f.config_file.empty()) {
        monfermi::io::apply_config_text(cfg, monfermi::io::read_file(f.config_file));
    }
    if (!f.preset.empty()) monfermi::io::apply_preset(cfg, f.preset);
    const std::pair<const char*, const std::string*> flags[] = {
        {"unraveling", &f.unraveling},   {"gamma", &f.gamma},
        {"L", &f.sizes},                 {"trajectories", &f.trajectories},
        {"seed", &f.seed},               {"t-final", &f.t_final},
        {"dt", &f.dt},                   {"burn-in", &f.burn_in},
        {"sample-every", &f.sample_every}, {"lambda", &f.lambda},
        {"threads", &f.threads},         {"bins", &f.bins},
        {"smooth-window", &f.smooth_window}, {"prominence", &f.prominence},
    };
    for (const auto& [key, value] : flags) {
        if (!value->empty()) monfermi::io::apply_setting(cfg, key, *value);
    }
    if (f.entropy) cfg.record_entropy = true;
    if (f.weighted_fit) cfg.weighted_fit = true;
    return cfg;
}

void warn_qj_bound(const monfermi::RunConfig& cfg) {
    for (auto u : cfg.unravelings) {
        if (u != monfermi::Unraveling::qj) continue;
        for (double g : cfg.gammas) {
            for (int l : cfg.sizes) {
                const auto tc = cfg.trajectory_config(u, g, l);
                if (tc.qj_worst_case_bound() > 0.1) {
                    std::fprintf(stderr,
                                 "warning: qj gamma=%g L=%d: 4*gamma*L*dt = %.3g > 0.1 "
                                 "(actual jump probability per step %.3g)\n",
                                 g, l, tc.qj_worst_case_bound(), tc.qj_total_jump_probability());
                }
            }
        }
    }
}

monfermi::EnsembleReport execute(const monfermi::RunConfig& cfg, const std::string& out) {
    warn_qj_bound(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    monfermi::EnsembleReport report = monfermi::run_ensemble(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto files = monfermi::io::emit_outputs(report, out);
    std::printf("wrote %zu files to %s (wall time %.1f s, seed %llu)\n", files.size(), out.c_str(),
                wall, static_cast<unsigned long long>(cfg.master_seed));
    return report;
}

void print_cells(const monfermi::EnsembleReport& r) {
    for (const auto& c : r.cells) {
        std::printf("%-3s gamma=%-6g L=%-4d n_plus=%.3f n_minus=%s %-8s ipr=%.5g+-%.2g\n",
                    monfermi::to_string(c.unraveling), c.gamma, c.sites, c.maxima.n_plus,
                    c.maxima.n_minus ? std::to_string(*c.maxima.n_minus).substr(0, 5).c_str() : "-",
                    monfermi::to_string(c.maxima.modality), c.ipr.mean, c.ipr.std_error);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monitored free-fermion chain: QSD and quantum-jump trajectory ensembles"};
    app.require_subcommand(1);

    EnsembleFlags run_flags, scan_flags, ipr_flags;
    auto* run = app.add_subcommand("run", "Run an ensemble over the configured grid");
    add_ensemble_flags(run, run_flags);
    auto* scan = app.add_subcommand("scan", "Gamma sweep at fixed L and bifurcation bracket");
    add_ensemble_flags(scan, scan_flags);
    auto* ipr = app.add_subcommand("ipr", "L sweep and IPR power-law fit per gamma");
    add_ensemble_flags(ipr, ipr_flags);

    int v_sites = 6;
    double v_gamma = 0.3;
    long long v_steps = 200;
    unsigned long long v_seed = 1;
    std::optional<double> v_dt;
    double v_lambda = 1.0;
    auto* verify = app.add_subcommand("verify", "Compare the Slater engine with the Fock oracle");
    verify->add_option("--L", v_sites, "Chain length (even, <= 10)")->capture_default_str();
    verify->add_option("--gamma", v_gamma, "Measurement rate")->capture_default_str();
    verify->add_option("--steps", v_steps, "Steps per unraveling")->capture_default_str();
    verify->add_option("--seed", v_seed, "Seed")->capture_default_str();
    verify->add_option("--dt", v_dt, "Time step for both unravelings");
    verify->add_option("--lambda", v_lambda, "Hopping amplitude")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*verify) {
            const auto rep = monfermi::verify(v_sites, v_gamma, v_steps, v_seed, v_dt, v_lambda);
            for (const auto* c : {&rep.qsd, &rep.qj}) {
                std::printf("%-3s max|dn|=%.3e max|dS|=%.3e max|dC|=%.3e events=%s jumps=%lld\n",
                            monfermi::to_string(c->unraveling), c->max_occupation_deviation,
                            c->max_entropy_deviation, c->max_correlation_deviation,
                            c->events_equal ? "identical" : "DIFFER",
                            static_cast<long long>(c->jumps));
            }
            const bool ok = rep.passed();
            std::printf("verify L=%d gamma=%g steps=%lld: %s\n", v_sites, v_gamma, v_steps,
                        ok ? "PASS" : "FAIL");
            return ok ? kOk : kVerifyFailed;
        }
        if (*run) {
            const auto cfg = build_config(run_flags);
            cfg.validate();
            print_cells(execute(cfg, run_flags.out));
            return kOk;
        }
        if (*scan) {
            const auto cfg = build_config(scan_flags);
            if (cfg.gammas.size() < 2) throw monfermi::ConfigError("scan needs at least two gamma values");
            cfg.validate();
            const auto r = execute(cfg, scan_flags.out);
            print_cells(r);
            for (const auto& b : r.bifurcations) {
                if (b.estimate.found) {
                    std::printf("%s L=%d: threshold %.4g, bracket [%g, %g]\n", monfermi::to_string(b.unraveling),
                                b.sites, b.estimate.threshold, b.estimate.bracket_low, b.estimate.bracket_high);
                } else {
                    std::printf("%s L=%d: %s\n", monfermi::to_string(b.unraveling), b.sites,
                                b.estimate.message.c_str());
                }
            }
            return kOk;
        }
        if (*ipr) {
            const auto cfg = build_config(ipr_flags);
            cfg.validate();
            const auto r = execute(cfg, ipr_flags.out);
            print_cells(r);
            if (r.scaling.empty()) throw monfermi::ConfigError("ipr needs at least three distinct L values");
            for (const auto& s : r.scaling) {
                std::printf("%s gamma=%g: alpha=%.4f r2=%.4f\n", monfermi::to_string(s.unraveling), s.gamma,
                            s.fit.alpha, s.fit.r_squared);
            }
            return kOk;
        }
    } catch (const monfermi::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
