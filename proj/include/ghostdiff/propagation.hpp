#pragma once

#include <variant>
#include <vector>

#include "ghostdiff/field.hpp"

namespace gd {

struct FreeSpace {
    double z;  // meters; negative back-propagates
};
struct ThinLens {
    double f;  // focal length, > 0
};
struct ApertureStop {
    double D;  // slit width (1D) / circle diameter (2D), > 0
};
/// Complex transmission screen (objects land here after rasterization).
struct TransmissionScreen {
    Grid grid;
    std::vector<cplx> t;
};
/// Ideal f-f lens relay performing an optical Fourier transform; the output
/// grid keeps n but rescales to dx_out = lambda*f/(n*dx_in).
struct FourierSystem {
    double f;
};

using Element = std::variant<FreeSpace, ThinLens, ApertureStop, TransmissionScreen, FourierSystem>;

struct OpticalTrain {
    std::vector<Element> elements;
};

/// Exact scalar angular-spectrum propagation over distance z. Unitary on the
/// propagating band; evanescent components decay for either sign of z.
ComplexField propagate_angular_spectrum(const ComplexField& f, double z);

/// Optical Fourier transform of an f-f system, power-preserving.
ComplexField apply_fourier_system(const ComplexField& f, double focal);

ComplexField apply_element(const ComplexField& f, const Element& e);

/// Left fold of apply_element over the train.
ComplexField apply_train(const ComplexField& f, const OpticalTrain& t);

/// Output grid of a train applied to fields on `in` (FourierSystem rescales).
Grid train_output_grid(const OpticalTrain& t, const Grid& in, double lambda);

/// Widest field support (meters) that FreeSpace(z) moves across this grid
/// without wraparound: extent - |z|*lambda/dx (the band-edge walk-off).
/// apply_element warns through the warning log when a field's support
/// exceeds it.
double wraparound_safe_extent(const Grid& g, double lambda, double z);

/// Discretized train response h[out][in], including the input quadrature
/// weight dx_in, so matrix contractions realize the continuous integrals.
struct ImpulseResponseMatrix {
    Grid in_grid, out_grid;
    std::vector<cplx> h;  // row-major, out_grid.n rows x in_grid.n cols

    cplx& at(int o, int i) { return h[std::size_t(o) * in_grid.n + i]; }
    const cplx& at(int o, int i) const { return h[std::size_t(o) * in_grid.n + i]; }
    /// h * samples (the dx_in weight is already inside h).
    std::vector<cplx> apply(const std::vector<cplx>& in) const;
};

/// Build the explicit matrix column-by-column from grid impulses.
/// 1D only; guard n_in*n_out <= 2^22. The out_grid argument is validated
/// against what the train actually produces.
ImpulseResponseMatrix impulse_matrix(const OpticalTrain& t, const Grid& in_grid,
                                     const Grid& out_grid, double lambda);
ImpulseResponseMatrix impulse_matrix(const OpticalTrain& t, const Grid& in_grid, double lambda);

/// Process-wide warning log for non-fatal physics diagnostics (wraparound).
namespace warnings {
long count();
void reset();
void emit(const std::string& message);
}  // namespace warnings

}  // namespace gd
