#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ghostdiff/experiments.hpp"
#include "ghostdiff/field.hpp"

using namespace gd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Small, fast ghost-diffraction smoke config (1D, spectral source).
ScenarioConfig smoke_config() {
    ScenarioConfig cfg;
    cfg.grid = Grid{1, 1024, 6e-6};
    cfg.source.method = SpeckleMethod::spectral;
    cfg.frames = 200;
    cfg.workers = 1;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ghostdiff_test_" + tag);
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("arm trains share the front end and differ by the object screen") {
    ScenarioConfig cfg = smoke_config();
    OpticalTrain a1 = arm1_train(cfg), a2 = arm2_train(cfg);
    CHECK(a1.elements.size() == a2.elements.size() + 1);
    CHECK_NOTHROW(verify_arm_composition(a1, a2));
    CHECK_THROWS_AS(verify_arm_composition(a2, a1), std::logic_error);
    CHECK_THROWS_AS(verify_arm_composition(a1, a1), std::logic_error);
}

TEST_CASE("scenario validation rejects inconsistent configurations") {
    ScenarioConfig ok = smoke_config();
    CHECK_NOTHROW(validate_scenario(ok));

    ScenarioConfig c = ok;
    c.source.D0 = 0.0;
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.diaphragm_D = 4e-3;  // grid extent 6.144 mm < 2 D
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.frames = 0;
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.object = PhaseDescriptor{PhaseDoubleSlit{M_PI, 8e-6, 24e-6}};  // spans under 8 samples
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.source.D0 = 0.05e-3;  // a handful of speckles: not a ghost source
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.experiment = ExperimentKind::coherent_limit;
    c.source.D0 = 0.01e-3;
    CHECK_NOTHROW(validate_scenario(c));
    c.source.D0 = 10e-3;  // thousands of speckles: not the coherent limit
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);
    c.source.D0 = 0.01e-3;
    c.grid = Grid{2, 1024, 6e-6};
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.experiment = ExperimentKind::coherence_transition;
    c.sweep_frames = 1;
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);
    c.sweep_frames = 10;
    c.d0_sweep.clear();
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);

    c = ok;
    c.experiment = ExperimentKind::oracle_suite;
    c.frames = 30;  // fewer than two per jackknife block
    CHECK_THROWS_AS(validate_scenario(c), std::invalid_argument);
}

TEST_CASE("fringe period follows n dx over the slit separation") {
    ScenarioConfig cfg = smoke_config();
    // lambda f / d / dx_out = n dx / d, independent of lambda and f.
    double want = double(cfg.grid.n) * cfg.grid.dx / 530e-6;
    CHECK(fringe_period_samples(cfg) == doctest::Approx(want).epsilon(1e-12));
    cfg.object = AmplitudeDescriptor{AmplitudeSingleSlit{160e-6}};
    CHECK(fringe_period_samples(cfg) == 0.0);
}

TEST_CASE("coherent reference is flat for the spectral source and chirped for the physical one") {
    ScenarioConfig cfg = smoke_config();
    ComplexField flat = coherent_reference_frame(cfg);
    for (int i = 0; i < cfg.grid.n; i += 97) {
        CHECK(flat.at(i).real() == doctest::Approx(1.0));
        CHECK(flat.at(i).imag() == doctest::Approx(0.0));
    }
    cfg.source.method = SpeckleMethod::physical;
    ComplexField chirp = coherent_reference_frame(cfg);
    for (int i = 0; i < cfg.grid.n; i += 97) {
        double x = cfg.grid.coord(i);
        double ph = M_PI * x * x / (cfg.source.lambda * cfg.source.z);
        CHECK(chirp.at(i).real() == doctest::Approx(std::cos(ph)).epsilon(1e-9));
        CHECK(chirp.at(i).imag() == doctest::Approx(std::sin(ph)).epsilon(1e-9));
    }
}

TEST_CASE("central_row slices the y = 0 row in 2d and passes 1d through") {
    Grid g1{1, 16, 1e-5};
    IntensityMap m1;
    m1.grid = g1;
    for (int i = 0; i < 16; ++i) m1.values.push_back(double(i));
    std::vector<double> r1 = central_row(m1);
    CHECK(r1 == m1.values);

    Grid g2{2, 16, 1e-5};
    IntensityMap m2;
    m2.grid = g2;
    m2.values.assign(g2.count(), 0.0);
    for (int iy = 0; iy < 16; ++iy)
        for (int ix = 0; ix < 16; ++ix) m2.values[std::size_t(iy) * 16 + ix] = 100.0 * iy + ix;
    std::vector<double> r2 = central_row(m2);
    REQUIRE(int(r2.size()) == 16);
    for (int ix = 0; ix < 16; ++ix) CHECK(r2[std::size_t(ix)] == doctest::Approx(800.0 + ix));
}

TEST_CASE("quick oracle suite passes end to end") {
    ScenarioConfig cfg = oracle_reference_config();
    cfg.workers = 1;
    ScenarioReport rep = run_oracle_suite(cfg, /*quick=*/true);
    CHECK(rep.all_pass);
    for (const Assertion& a : rep.assertions) {
        INFO(a.name, " = ", a.value, " vs ", a.threshold);
        CHECK(a.pass);
    }
    CHECK(rep.metrics.count("moment_oracle_rms") == 1);
    CHECK(rep.metrics.count("reflection_identity_error") == 1);
}

TEST_CASE("single-frame run flags insufficient statistics instead of failing") {
    TempDir tmp("single_frame");
    ScenarioConfig cfg = smoke_config();
    cfg.frames = 1;
    cfg.out_dir = tmp.path.string();
    ScenarioReport rep = run_ghost_diffraction(cfg);
    bool flagged = false;
    for (const std::string& f : rep.flags)
        if (f.find("insufficient frames") != std::string::npos) flagged = true;
    CHECK(flagged);
    bool wrote_single_shot = false;
    for (const std::string& a : rep.artifacts)
        if (a.find("single_shot") != std::string::npos) wrote_single_shot = true;
    CHECK(wrote_single_shot);
}

TEST_CASE("ghost run artifacts are byte-identical across worker counts") {
    TempDir t1("workers1"), t3("workers3");
    ScenarioConfig cfg = smoke_config();
    cfg.frames = 120;
    cfg.workers = 1;
    cfg.out_dir = t1.path.string();
    ScenarioReport r1 = run_ghost_diffraction(cfg);
    cfg.workers = 3;
    cfg.out_dir = t3.path.string();
    ScenarioReport r3 = run_ghost_diffraction(cfg);

    bool compared = false;
    for (const std::string& name : {"g_cut.csv", "mean_intensity.csv"}) {
        fs::path p1 = t1.path / name, p3 = t3.path / name;
        if (fs::exists(p1) && fs::exists(p3)) {
            CHECK(slurp(p1) == slurp(p3));
            compared = true;
        }
    }
    CHECK(compared);
    CHECK(r1.metrics.at("n_speckles") == doctest::Approx(r3.metrics.at("n_speckles")));
}

TEST_CASE("amplitude objects run through the ghost pipeline") {
    ScenarioConfig cfg = smoke_config();
    cfg.object = AmplitudeDescriptor{AmplitudeDoubleSlit{160e-6, 530e-6}};
    cfg.frames = 100;
    ScenarioReport rep = run_ghost_diffraction(cfg);
    CHECK(rep.metrics.count("g_nrms_vs_reference") == 1);
    CHECK(rep.metrics.at("frames") == doctest::Approx(100.0));
}

TEST_CASE("run_scenario dispatches on the experiment kind") {
    ScenarioConfig cfg = oracle_reference_config();
    cfg.workers = 1;
    ScenarioReport rep = run_scenario(cfg, /*quick=*/true);
    CHECK(rep.name == cfg.name);
    CHECK(rep.wall_seconds > 0.0);
}
