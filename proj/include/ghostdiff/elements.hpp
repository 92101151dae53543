#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ghostdiff/field.hpp"

namespace gd {

/// Object descriptors. All widths/positions in meters, phases in radians.
/// The double slit is the default test object: two slits of width
/// `slit_width` centered at +-separation/2, overall extent
/// separation + slit_width.
struct PhaseStep {
    double phi;
    double width;  // the phase patch covers 0 <= x < width
};
struct PhaseGrating {
    double phi;
    double period;
    double width;  // alternating 0/phi half-period stripes within |x| <= width/2
};
struct PhaseDoubleSlit {
    double phi;
    double slit_width;
    double separation;  // center-to-center
};
struct PhaseCustom {
    std::vector<double> phase;  // radians, one value per grid sample
};
struct AmplitudeDoubleSlit {
    double slit_width;
    double separation;
};
struct AmplitudeSingleSlit {
    double slit_width;
};

using PhaseDescriptor = std::variant<PhaseStep, PhaseGrating, PhaseDoubleSlit, PhaseCustom>;
using AmplitudeDescriptor = std::variant<AmplitudeDoubleSlit, AmplitudeSingleSlit>;

/// Unit-modulus transmission object: t(x) = exp(i*phase(x)).
struct PhaseObject {
    Grid grid;
    std::vector<double> phase;  // radians
    double extent = 0.0;        // overall object width, for guard checks
};

/// Real transmission in [0, 1].
struct AmplitudeObject {
    Grid grid;
    std::vector<double> trans;
    double extent = 0.0;
};

/// Circular (2D) or slit (1D) opening of diameter D, matching the grid's
/// dimensionality when applied.
struct Diaphragm {
    double D;
};

/// Build a phase object on the grid. Guard: the object's overall extent must
/// span at least 8 grid samples. 2D grids extrude the profile along y.
PhaseObject make_phase_object(const PhaseDescriptor& d, const Grid& grid);
AmplitudeObject make_amplitude_object(const AmplitudeDescriptor& d, const Grid& grid);

std::vector<cplx> transmission(const PhaseObject& obj);
std::vector<double> transmission(const AmplitudeObject& obj);

/// Diaphragm indicator on a grid: |x| <= D/2 (1D) or r <= D/2 (2D).
std::vector<double> diaphragm_mask(const Diaphragm& d, const Grid& grid);

}  // namespace gd
