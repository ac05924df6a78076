#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "monfermi/ensemble.hpp"
#include "monfermi/io.hpp"

using namespace monfermi;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.unravelings = {Unraveling::qsd, Unraveling::qj};
    c.gammas = {0.1, 0.6};
    c.sizes = {8, 12, 16};
    c.t_final = 30.0;
    c.trajectories = 4;
    c.master_seed = 11;
    c.record_entropy = true;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(MONFERMI_TEST_TMPDIR) / name;
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(CellId, InjectiveOverGrid) {
    std::set<std::uint64_t> ids;
    int count = 0;
    for (auto u : {Unraveling::qsd, Unraveling::qj}) {
        for (double g : {0.0, 0.05, 0.1, 0.15, 0.3, 1.0, 2.5}) {
            for (int l : {2, 16, 32, 64, 128, 256}) {
                ids.insert(cell_id(u, g, l));
                ++count;
            }
        }
    }
    EXPECT_EQ(static_cast<int>(ids.size()), count);
}

TEST(RunEnsemble, WorkerCountDoesNotChangeResults) {
    auto a = small_config();
    a.workers = 1;
    auto b = a;
    b.workers = 8;
    const std::string ja = io::dump(io::to_json(run_ensemble(a)));
    const std::string jb = io::dump(io::to_json(run_ensemble(b)));
    EXPECT_EQ(ja, jb);
}

TEST(RunEnsemble, RerunIsByteIdentical) {
    const auto cfg = small_config();
    EXPECT_EQ(io::dump(io::to_json(run_ensemble(cfg))), io::dump(io::to_json(run_ensemble(cfg))));
}

TEST(RunEnsemble, SummariesAreConsistent) {
    const auto cfg = small_config();
    const auto r = run_ensemble(cfg);
    ASSERT_EQ(r.cells.size(), 12u);
    for (const auto& c : r.cells) {
        EXPECT_EQ(c.trajectories, 4);
        EXPECT_TRUE(c.failures.empty());
        // 25 samples (t = 6..30) per trajectory.
        EXPECT_EQ(c.histogram.total(), 4 * 25 * c.sites);
        EXPECT_LT(c.max_number_error, 1e-9);
        EXPECT_LT(c.max_orthonormality_error, 1e-9);
        EXPECT_GT(c.ipr.mean, 0.0);
        EXPECT_LE(c.ipr.mean, 1.0);
        ASSERT_TRUE(c.entropy.has_value());
        EXPECT_EQ(c.jump_rate_per_site.has_value(), c.unraveling == Unraveling::qj);
        EXPECT_NEAR(c.n_binned.mean, 0.5, 0.02);
    }
    EXPECT_EQ(r.scaling.size(), 4u);
    EXPECT_EQ(r.bifurcations.size(), 6u);
    EXPECT_THROW(r.cell(Unraveling::qsd, 0.3, 8), std::out_of_range);
}

TEST(RunEnsemble, TooManyFailuresAbort) {
    RunConfig cfg;
    cfg.gammas = {1e5};  // measurement factors overflow to infinity
    cfg.sizes = {8};
    cfg.t_final = 5.0;
    cfg.trajectories = 3;
    EXPECT_THROW(run_ensemble(cfg), EnsembleError);
}

TEST(RunEnsemble, DuplicateCellsRejected) {
    RunConfig cfg;
    cfg.gammas = {0.1, 0.1};
    EXPECT_THROW(run_ensemble(cfg), ConfigError);
}

TEST(EffectiveWorkers, NeverExceedsJobs) {
    EXPECT_EQ(effective_workers(8, 3), 3);
    EXPECT_EQ(effective_workers(1, 100), 1);
    EXPECT_GE(effective_workers(0, 100), 1);
}

TEST(Config, ParsesKeysCommentsAndPresets) {
    RunConfig cfg;
    io::apply_config_text(cfg,
                          "# ensemble\n"
                          "gamma = 0.1, 0.2   # two rates\n"
                          "unraveling = both\n"
                          "preset = desk\n"
                          "trajectories = 12\n"
                          "seed = 99\n"
                          "entropy = true\n");
    EXPECT_EQ(cfg.sizes, (std::vector<int>{16, 32, 64}));
    EXPECT_EQ(cfg.trajectories, 12);
    EXPECT_EQ(cfg.gammas, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(cfg.unravelings.size(), 2u);
    EXPECT_EQ(cfg.master_seed, 99u);
    EXPECT_TRUE(cfg.record_entropy);
    EXPECT_DOUBLE_EQ(cfg.t_final, 400.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    RunConfig cfg;
    EXPECT_THROW(io::apply_config_text(cfg, "colour = red\n"), ConfigError);
    EXPECT_THROW(io::apply_config_text(cfg, "gamma 0.1\n"), ConfigError);
    EXPECT_THROW(io::apply_config_text(cfg, "L = sixteen\n"), ConfigError);
    EXPECT_THROW(io::apply_preset(cfg, "huge"), ConfigError);
}

TEST(Config, RoundTripsThroughText) {
    auto cfg = small_config();
    cfg.dt = 0.02;
    RunConfig back;
    io::apply_config_text(back, io::to_config_text(cfg));
    EXPECT_EQ(io::to_config_text(back), io::to_config_text(cfg));
}

TEST(Outputs, FilesAndContents) {
    const auto cfg = small_config();
    const auto r = run_ensemble(cfg);
    const fs::path dir = scratch("outputs");
    const auto files = io::emit_outputs(r, dir);
    EXPECT_EQ(files.size(), 12u + 2u + 1u + 1u);
    EXPECT_TRUE(fs::exists(dir / "pn_qsd_g0.1_L8.csv"));
    EXPECT_TRUE(fs::exists(dir / "pn_qj_g0.6_L16.csv"));

    std::stringstream pn(io::read_file(dir / "pn_qsd_g0.6_L12.csv"));
    std::string line;
    std::getline(pn, line);
    EXPECT_EQ(line, "n,density");
    double integral = 0.0;
    int rows = 0;
    while (std::getline(pn, line)) {
        integral += std::stod(line.substr(line.find(',') + 1)) / 100.0;
        ++rows;
    }
    EXPECT_EQ(rows, 100);
    EXPECT_NEAR(integral, 1.0, 1e-9);

    const std::string maxima = io::read_file(dir / "maxima_qj.csv");
    EXPECT_EQ(maxima.substr(0, maxima.find('\n')), "gamma,L,n_plus,n_minus,modality");
    const std::string ipr = io::read_file(dir / "ipr_scaling.csv");
    EXPECT_EQ(ipr.substr(0, ipr.find('\n')), "unraveling,gamma,L,mean_ipr,std_error,alpha");

    const std::string text = io::read_file(dir / "report.json");
    EXPECT_EQ(io::dump(io::json::parse(text)), text);
    const auto j = io::json::parse(text);
    EXPECT_EQ(j["cells"].size(), 12u);
    EXPECT_EQ(j["seeds"]["master_seed"], 11);
}
