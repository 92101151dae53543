#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ghostdiff/field.hpp"

namespace gd {

enum class SpeckleMethod { physical, spectral };

/// Pseudo-thermal source description. The transverse coherence scale at the
/// observation plane is lambda*z/D0 (Van Cittert-Zernike); the spectral
/// method can override it with an explicit Gaussian correlation length.
struct SpeckleSourceConfig {
    SpeckleMethod method = SpeckleMethod::physical;
    double D0 = 0.0;      // source diameter, meters
    double z = 0.0;       // source-to-observation distance, meters
    double lambda = 0.0;  // meters
    double target_dx_speckle = 0.0;  // > 0: Gaussian field correlation length (spectral only)
};

/// Characteristic transverse coherence length lambda*z/D0.
double expected_speckle_size(double lambda, double z, double D0);

/// N_sp = (D / dx_speckle)^2 — speckles inside a diameter-D diaphragm.
double speckle_count(double D, double dx_speckle);

/// FWHM calibration: the intensity-autocovariance FWHM of fully developed
/// speckle from a uniform slit (1D) / disk (2D) source is this constant
/// times lambda*z/D0. Fixed from the half-power points of sinc^2 / jinc^2;
/// unit tests re-derive both values.
inline constexpr double kSpeckleFwhm1D = 0.8858929413;
inline constexpr double kSpeckleFwhm2D = 1.0289939399;

/// Expected intensity-autocovariance FWHM for this config on a grid of the
/// given dimensionality.
double expected_speckle_fwhm(const SpeckleSourceConfig& cfg, int dims);

struct SpeckleFrame {
    ComplexField field;
    std::uint64_t seed = 0;
    long frame_index = 0;
};

/// One circular-Gaussian speckle realization at the observation plane.
/// (seed, frame_index, config, grid) fully determine the samples, on any
/// worker in any order.
///
/// physical: i.i.d. complex Gaussian noise on the D0-wide source support,
/// band-limited to the observation cone and propagated distance z by the
/// angular spectrum on an enlarged grid (so no kernel wraparound reaches the
/// cropped observation window).
/// spectral: white complex Gaussian noise shaped directly at the observation
/// plane by the corresponding coherence filter (slit/disk spectrum, or a
/// Gaussian when target_dx_speckle is set). Mean intensity is 1.
SpeckleFrame generate_speckle_frame(const SpeckleSourceConfig& cfg, const Grid& grid,
                                    std::uint64_t seed, long frame_index);

/// 50/50 splitter: two sample-wise identical copies at 1/sqrt(2) amplitude.
std::pair<ComplexField, ComplexField> beamsplit(const ComplexField& f);

/// Exact lattice field correlation of the 1D spectral method: returns C[u]
/// with <E(i) E*(j)> = C[(i-j) mod n], C[0] = 1. This is what makes the
/// small-grid quadrature comparisons exact rather than model-approximate.
std::vector<double> spectral_lattice_correlation(const SpeckleSourceConfig& cfg, const Grid& grid);

/// Slit-source coherence kernel g(u) = sinc(D0 u / (lambda z)) evaluated on
/// lags u = k*dx — the continuous Van Cittert-Zernike kernel used by the
/// analytic correlation models and the resolution-blurred references.
std::vector<double> slit_coherence_kernel(const SpeckleSourceConfig& cfg, const Grid& grid);

}  // namespace gd
