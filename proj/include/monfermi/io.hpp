#pragma once

// Run configuration text format, JSON report serialization and CSV outputs.
//
// Config files are flat `key = value` lines; `#` starts a comment. Keys match
// the CLI long flags without the leading dashes (gamma, L, unraveling, trajectories,
// seed, t-final, dt, burn-in, sample-every, lambda, threads, bins,
// smooth-window, prominence, entropy, weighted-fit, preset). Lists are
// comma separated.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "monfermi/ensemble.hpp"
#include "monfermi/stats.hpp"
#include "monfermi/unraveling.hpp"

namespace monfermi::io {

using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Short form used in file names, e.g. 0.3 -> "0.3".
inline std::string format_gamma(double g) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", g);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for '" + key + "': " + v);
    }
}

inline long long parse_integer(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for '" + key + "': " + v);
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for '" + key + "': " + v);
}

/// Named parameter sets. "desk": L in {16, 32, 64}, 48 trajectories, t_f = 400.
/// "paper": L = 128, 80 trajectories, t_f = 1000.
inline void apply_preset(RunConfig& cfg, const std::string& name) {
    if (name == "desk") {
        cfg.sizes = {16, 32, 64};
        cfg.trajectories = 48;
        cfg.t_final = 400.0;
    } else if (name == "paper") {
        cfg.sizes = {128};
        cfg.trajectories = 80;
        cfg.t_final = 1000.0;
    } else if (name != "custom") {
        throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
    }
    cfg.preset = name;
}

/// Applies one `key = value` setting. Unknown keys are rejected.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "preset") {
        apply_preset(cfg, value);
    } else if (key == "unraveling") {
        cfg.unravelings.clear();
        for (const auto& s : split_list(value)) {
            if (s == "both") {
                cfg.unravelings = {Unraveling::qsd, Unraveling::qj};
            } else {
                cfg.unravelings.push_back(parse_unraveling(s));
            }
        }
    } else if (key == "gamma") {
        cfg.gammas.clear();
        for (const auto& s : split_list(value)) cfg.gammas.push_back(parse_double(key, s));
    } else if (key == "L") {
        cfg.sizes.clear();
        for (const auto& s : split_list(value)) cfg.sizes.push_back(static_cast<int>(parse_integer(key, s)));
    } else if (key == "lambda") {
        cfg.lambda = parse_double(key, value);
    } else if (key == "dt") {
        cfg.dt = parse_double(key, value);
    } else if (key == "t-final") {
        cfg.t_final = parse_double(key, value);
    } else if (key == "burn-in") {
        cfg.burn_in = parse_double(key, value);
    } else if (key == "sample-every") {
        cfg.sample_every = parse_double(key, value);
    } else if (key == "trajectories") {
        cfg.trajectories = static_cast<int>(parse_integer(key, value));
    } else if (key == "seed") {
        cfg.master_seed = static_cast<std::uint64_t>(parse_integer(key, value));
    } else if (key == "threads") {
        cfg.workers = static_cast<int>(parse_integer(key, value));
    } else if (key == "bins") {
        cfg.bins = static_cast<int>(parse_integer(key, value));
    } else if (key == "smooth-window") {
        cfg.maxima.smooth_window = static_cast<int>(parse_integer(key, value));
    } else if (key == "prominence") {
        cfg.maxima.prominence = parse_double(key, value);
    } else if (key == "entropy") {
        cfg.record_entropy = parse_bool(key, value);
    } else if (key == "weighted-fit") {
        cfg.weighted_fit = parse_bool(key, value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

/// Parses config text into ordered (key, value) pairs.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

inline void apply_config_text(RunConfig& cfg, const std::string& text) {
    auto settings = parse_config_text(text);
    // Presets set several keys at once, so they go first regardless of position.
    for (const auto& [k, v] : settings) {
        if (k == "preset") apply_setting(cfg, k, v);
    }
    for (const auto& [k, v] : settings) {
        if (k != "preset") apply_setting(cfg, k, v);
    }
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + p.string());
}

/// Effective configuration rendered back into the config text format.
inline std::string to_config_text(const RunConfig& cfg) {
    auto join = [](const auto& xs, auto fmt) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
        return s;
    };
    std::string t;
    t += "preset = " + cfg.preset + "\n";
    t += "unraveling = " + join(cfg.unravelings, [](Unraveling u) { return std::string(to_string(u)); }) + "\n";
    t += "gamma = " + join(cfg.gammas, [](double g) { return format_double(g); }) + "\n";
    t += "L = " + join(cfg.sizes, [](int l) { return std::to_string(l); }) + "\n";
    t += "lambda = " + format_double(cfg.lambda) + "\n";
    if (cfg.dt) t += "dt = " + format_double(*cfg.dt) + "\n";
    t += "t-final = " + format_double(cfg.t_final) + "\n";
    t += "burn-in = " + format_double(cfg.burn_in_value()) + "\n";
    t += "sample-every = " + format_double(cfg.sample_every) + "\n";
    t += "trajectories = " + std::to_string(cfg.trajectories) + "\n";
    t += "seed = " + std::to_string(cfg.master_seed) + "\n";
    t += "bins = " + std::to_string(cfg.bins) + "\n";
    t += "smooth-window = " + std::to_string(cfg.maxima.smooth_window) + "\n";
    t += "prominence = " + format_double(cfg.maxima.prominence) + "\n";
    t += std::string("entropy = ") + (cfg.record_entropy ? "true" : "false") + "\n";
    t += std::string("weighted-fit = ") + (cfg.weighted_fit ? "true" : "false") + "\n";
    return t;
}

inline json to_json(const MeanStderr& m) {
    return json{{"mean", m.mean}, {"std_error", m.std_error}, {"count", m.count}};
}

inline json to_json(const MaximaReport& m) {
    json j;
    j["n_plus"] = m.n_plus;
    j["p_plus"] = m.p_plus;
    j["n_minus"] = m.n_minus ? json(*m.n_minus) : json(nullptr);
    j["p_minus"] = m.p_minus ? json(*m.p_minus) : json(nullptr);
    j["modality"] = to_string(m.modality);
    return j;
}

inline json to_json(const CellReport& c) {
    json j;
    j["unraveling"] = to_string(c.unraveling);
    j["gamma"] = c.gamma;
    j["L"] = c.sites;
    j["dt"] = c.dt;
    j["cell_id"] = c.cell;
    j["trajectories"] = c.trajectories;
    j["histogram"] = {{"bins", c.histogram.bin_count()},
                      {"total", c.histogram.total()},
                      {"counts", c.histogram.counts()}};
    j["maxima"] = to_json(c.maxima);
    j["n_binned_mean"] = to_json(c.n_binned);
    j["n_empty_sublattice"] = to_json(c.n_empty_sublattice);
    j["ipr"] = to_json(c.ipr);
    j["entropy"] = c.entropy ? to_json(*c.entropy) : json(nullptr);
    j["mirror_ks"] = c.mirror_ks;
    if (c.jump_rate_per_site) {
        j["jump_rate_per_site"] = *c.jump_rate_per_site;
        j["expected_jump_rate_per_site"] = 2.5 * c.gamma;
    }
    j["max_number_error"] = c.max_number_error;
    j["max_orthonormality_error"] = c.max_orthonormality_error;
    json fails = json::array();
    for (const auto& f : c.failures) fails.push_back({{"trajectory", f.index}, {"message", f.message}});
    j["failures"] = fails;
    return j;
}

inline json to_json(const EnsembleReport& r) {
    json j;
    const RunConfig& c = r.config;
    json cfg;
    cfg["preset"] = c.preset;
    cfg["text"] = to_config_text(c);
    j["config"] = cfg;
    json seeds;
    seeds["master_seed"] = c.master_seed;
    seeds["derivation"] = "stream(master_seed, trajectory_index, cell_id)";
    json ids = json::array();
    for (const auto& cell : r.cells) {
        ids.push_back({{"unraveling", to_string(cell.unraveling)},
                       {"gamma", cell.gamma},
                       {"L", cell.sites},
                       {"cell_id", cell.cell},
                       {"trajectory_indices", {0, c.trajectories - 1}}});
    }
    seeds["cells"] = ids;
    j["seeds"] = seeds;
    json cells = json::array();
    for (const auto& cell : r.cells) cells.push_back(to_json(cell));
    j["cells"] = cells;
    json scaling = json::array();
    for (const auto& s : r.scaling) {
        json pts = json::array();
        for (const auto& p : s.fit.points) {
            pts.push_back({{"L", p.size}, {"mean_ipr", p.value}, {"std_error", p.std_error}});
        }
        scaling.push_back({{"unraveling", to_string(s.unraveling)},
                           {"gamma", s.gamma},
                           {"alpha", s.fit.alpha},
                           {"intercept", s.fit.intercept},
                           {"r_squared", s.fit.r_squared},
                           {"points", pts}});
    }
    j["scaling"] = scaling;
    json bif = json::array();
    for (const auto& b : r.bifurcations) {
        json e{{"unraveling", to_string(b.unraveling)}, {"L", b.sites}, {"found", b.estimate.found}};
        if (b.estimate.found) {
            e["threshold"] = b.estimate.threshold;
            e["bracket"] = {b.estimate.bracket_low, b.estimate.bracket_high};
        } else {
            e["message"] = b.estimate.message;
        }
        bif.push_back(e);
    }
    j["bifurcations"] = bif;
    return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string density_csv(const Histogram& h) {
    std::string s = "n,density\n";
    const auto d = normalized_density(h);
    for (int k = 0; k < h.bin_count(); ++k) {
        s += format_double(h.bin_center(k)) + "," + format_double(d[static_cast<std::size_t>(k)]) + "\n";
    }
    return s;
}

inline std::string maxima_csv(const EnsembleReport& r, Unraveling u) {
    std::string s = "gamma,L,n_plus,n_minus,modality\n";
    for (const auto& c : r.cells) {
        if (c.unraveling != u || c.histogram.total() == 0) continue;
        s += format_double(c.gamma) + "," + std::to_string(c.sites) + "," +
             format_double(c.maxima.n_plus) + "," +
             (c.maxima.n_minus ? format_double(*c.maxima.n_minus) : std::string()) + "," +
             to_string(c.maxima.modality) + "\n";
    }
    return s;
}

inline std::string ipr_csv(const EnsembleReport& r) {
    std::string s = "unraveling,gamma,L,mean_ipr,std_error,alpha\n";
    for (const auto& c : r.cells) {
        if (c.ipr.count == 0) continue;
        std::string alpha;
        for (const auto& sc : r.scaling) {
            if (sc.unraveling == c.unraveling && sc.gamma == c.gamma) alpha = format_double(sc.fit.alpha);
        }
        s += std::string(to_string(c.unraveling)) + "," + format_double(c.gamma) + "," +
             std::to_string(c.sites) + "," + format_double(c.ipr.mean) + "," +
             format_double(c.ipr.std_error) + "," + alpha + "\n";
    }
    return s;
}

/// Writes pn_<u>_g<gamma>_L<L>.csv per cell, maxima_<u>.csv per unraveling,
/// ipr_scaling.csv and report.json into `dir` (created if missing). Returns
/// the written paths.
inline std::vector<std::filesystem::path> emit_outputs(const EnsembleReport& r,
                                                       const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& content) {
        const auto p = dir / name;
        write_file(p, content);
        written.push_back(p);
    };
    for (const auto& c : r.cells) {
        if (c.histogram.total() == 0) continue;
        put("pn_" + std::string(to_string(c.unraveling)) + "_g" + format_gamma(c.gamma) + "_L" +
                std::to_string(c.sites) + ".csv",
            density_csv(c.histogram));
    }
    for (auto u : r.config.unravelings) {
        put("maxima_" + std::string(to_string(u)) + ".csv", maxima_csv(r, u));
    }
    put("ipr_scaling.csv", ipr_csv(r));
    put("report.json", dump(to_json(r)));
    return written;
}

}  // namespace monfermi::io
