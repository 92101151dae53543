#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ghostdiff/correlation.hpp"
#include "ghostdiff/elements.hpp"
#include "ghostdiff/propagation.hpp"
#include "ghostdiff/speckle.hpp"

namespace gd {

enum class ExperimentKind {
    ghost_diffraction,    // incoherent source: pattern lives in G, not in <I1>
    coherence_transition, // source-size sweep: speckle size and single-shot fringes
    coherent_limit,       // few-speckle source: G factorizes, correlation goes blind
    oracle_suite,         // small-grid Monte Carlo vs quadrature vs moment identity
};

const char* to_string(ExperimentKind k);

/// Complete description of one run. Defaults are the headline geometry:
/// 532 nm pseudo-thermal source 0.395 m before the object plane, 3 mm
/// diaphragm, pi-phase double slit (160 um slits, 530 um apart), and an
/// f = 0.2 m Fourier transform in both arms.
struct ScenarioConfig {
    std::string name = "ghost_diffraction";
    ExperimentKind experiment = ExperimentKind::ghost_diffraction;
    Grid grid{2, 1024, 6e-6};
    SpeckleSourceConfig source{SpeckleMethod::physical, 10e-3, 0.395, 532e-9, 0.0};
    double diaphragm_D = 3e-3;
    std::variant<PhaseDescriptor, AmplitudeDescriptor> object =
        PhaseDescriptor{PhaseDoubleSlit{M_PI, 160e-6, 530e-6}};
    double fourier_f = 0.2;
    long frames = 40000;
    std::uint64_t seed = 20260822;
    int workers = 0;  // 0: GHOSTDIFF_WORKERS env var, else hardware
    std::vector<double> d0_sweep{10e-3, 1e-3, 0.1e-3, 0.01e-3};
    long sweep_frames = 100;        // frames per sweep point
    double fringe_outer = 1.0e-3;   // outer edge of the fringe-metric window
    double compare_halfwidth = 1.2e-3;  // |x| <= this: pattern-comparison window
    std::string out_dir;            // empty: write no artifacts
};

/// One recorded check: `pass` is `value cmp threshold`.
struct Assertion {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string cmp;  // "<", "<=", ">", ">="
    bool pass = false;
};

/// Per-source-size record of the coherence transition.
struct TransitionRecord {
    double D0 = 0.0;
    double n_speckles = 0.0;       // (D / (lambda z / D0))^2
    double expected_fwhm = 0.0;    // calibrated speckle FWHM, meters (0: out of range)
    double measured_fwhm = 0.0;    // ensemble estimate, meters (0: not measurable)
    double visibility = 0.0;       // median gated single-shot fringe visibility
    double visibility_best = 0.0;  // best single shot
    double nrms_best = 0.0;        // best single-shot NRMS against the coherent reference
};

struct ScenarioReport {
    std::string name;
    std::map<std::string, double> metrics;
    std::vector<Assertion> assertions;
    std::vector<TransitionRecord> transition;  // coherence_transition only
    std::vector<std::string> artifacts;        // files written under out_dir
    std::vector<std::string> flags;            // non-fatal conditions worth surfacing
    bool all_pass = true;
    double wall_seconds = 0.0;
};

/// Worker count actually used: `requested` if > 0, else the GHOSTDIFF_WORKERS
/// environment variable, else the hardware concurrency (at least 1). Results
/// are bit-identical for every worker count.
int resolve_workers(int requested);

/// The two arms share the diaphragm and the Fourier lens; only arm 1 carries
/// the object, exactly once.
OpticalTrain arm1_train(const ScenarioConfig& cfg);
OpticalTrain arm2_train(const ScenarioConfig& cfg);

/// Throws unless `with_object` holds exactly one transmission screen and
/// `reference_arm` holds none.
void verify_arm_composition(const OpticalTrain& with_object, const OpticalTrain& reference_arm);

/// Structural checks shared by every runner: positive geometry, grid extent
/// at least twice the diaphragm, resolvable object, well-formed source.
void validate_scenario(const ScenarioConfig& cfg);

/// Unit-amplitude coherent illumination at the object plane. The physical
/// source model acquires the diverging-wavefront curvature of a point source
/// a distance z away, exp(+i pi r^2 / (lambda z)); the spectral model is
/// defined at the object plane and stays flat.
ComplexField coherent_reference_frame(const ScenarioConfig& cfg);

/// Fringe period of the double-slit far field on the output grid, in output
/// samples: (lambda f / separation) / dx_out = n dx / separation. Returns 0
/// for objects without a characteristic fringe period.
double fringe_period_samples(const ScenarioConfig& cfg);

/// The central row of a map (the full profile in 1D, the y = 0 row in 2D).
std::vector<double> central_row(const IntensityMap& m);

/// Canned small-grid configuration for the oracle suite: 64-sample 1D grid
/// where the Monte Carlo pipeline, the quadrature evaluation and the
/// Gaussian-moment identity are cross-checked entry by entry.
ScenarioConfig oracle_reference_config();

ScenarioReport run_ghost_diffraction(const ScenarioConfig& cfg);
ScenarioReport run_coherence_transition(const ScenarioConfig& cfg);
ScenarioReport run_coherent_limit_gi_failure(const ScenarioConfig& cfg);
ScenarioReport run_oracle_suite(const ScenarioConfig& cfg, bool quick = false);

/// Dispatch on cfg.experiment.
ScenarioReport run_scenario(const ScenarioConfig& cfg, bool quick = false);

}  // namespace gd
