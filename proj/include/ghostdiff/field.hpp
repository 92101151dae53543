#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gd {

using cplx = std::complex<double>;

/// Uniform sample grid, centered so that coord(i) = (i - n/2)*dx.
/// dims is 1 or 2; 2D grids are square with row-major storage [iy*n + ix].
struct Grid {
    int dims = 1;
    int n = 0;        // samples per axis
    double dx = 0.0;  // meters per sample

    Grid() = default;
    Grid(int dims_, int n_, double dx_) : dims(dims_), n(n_), dx(dx_) {
        if (dims != 1 && dims != 2) throw std::invalid_argument("Grid: dims must be 1 or 2");
        if (n < 8) throw std::invalid_argument("Grid: need n >= 8 samples per axis");
        if (!(dx > 0.0)) throw std::invalid_argument("Grid: dx must be positive");
    }

    std::size_t count() const {
        return dims == 1 ? std::size_t(n) : std::size_t(n) * std::size_t(n);
    }
    double coord(int i) const { return (i - n / 2) * dx; }
    double extent() const { return n * dx; }
    /// Cell measure for quadrature: dx in 1D, dx^2 in 2D.
    double cell() const { return dims == 1 ? dx : dx * dx; }
    /// Index of the sample nearest to physical coordinate x.
    int index_of(double x) const {
        int i = n / 2 + int(std::lround(x / dx));
        if (i < 0) i = 0;
        if (i >= n) i = n - 1;
        return i;
    }

    bool operator==(const Grid& o) const {
        return dims == o.dims && n == o.n && dx == o.dx;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

/// On the centered grid the reflection x -> -x is the index map
/// i -> (n - i) mod n; the lone wrap sample i = 0 sits at -n/2*dx == +n/2*dx
/// modulo the grid period, so the map is exact for DFT-based kernels.
inline int reflect_index(int i, int n) { return i == 0 ? 0 : n - i; }

/// Scalar complex field sampled on a grid.
struct ComplexField {
    Grid grid;
    double wavelength = 0.0;  // meters
    std::vector<cplx> samples;

    ComplexField() = default;
    ComplexField(const Grid& g, double lambda)
        : grid(g), wavelength(lambda), samples(g.count(), cplx(0.0)) {
        if (!(lambda > 0.0)) throw std::invalid_argument("ComplexField: wavelength must be positive");
    }

    cplx& at(int ix) { return samples[std::size_t(ix)]; }
    cplx& at(int iy, int ix) { return samples[std::size_t(iy) * grid.n + ix]; }
    const cplx& at(int ix) const { return samples[std::size_t(ix)]; }
    const cplx& at(int iy, int ix) const { return samples[std::size_t(iy) * grid.n + ix]; }
};

/// Nonnegative intensity samples on a grid.
struct IntensityMap {
    Grid grid;
    std::vector<double> values;

    IntensityMap() = default;
    explicit IntensityMap(const Grid& g) : grid(g), values(g.count(), 0.0) {}
};

/// I = |E|^2, same grid.
IntensityMap intensity(const ComplexField& f);

/// Sum of intensities times the cell measure (dx or dx^2).
double total_power(const IntensityMap& m);
double total_power(const ComplexField& f);

}  // namespace gd
