#include "ghostdiff/propagation.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>

#include "ghostdiff/fft.hpp"

namespace gd {

namespace warnings {
namespace {
std::atomic<long> warning_count{0};
std::mutex io_mutex;
}  // namespace
long count() { return warning_count.load(); }
void reset() { warning_count.store(0); }
void emit(const std::string& message) {
    ++warning_count;
    std::lock_guard<std::mutex> lock(io_mutex);
    std::cerr << "warning: " << message << "\n";
}
}  // namespace warnings

namespace {

void check_finite(const ComplexField& f, const char* who) {
    for (const auto& s : f.samples)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw std::invalid_argument(std::string(who) + ": field contains non-finite samples");
}

/// FFT frequency of bin k on an n-sample grid with spacing dx.
double fft_freq(int k, int n, double dx) {
    int kk = k < (n + 1) / 2 ? k : k - n;
    return double(kk) / (double(n) * dx);
}

/// Transfer-function factor for one spatial frequency magnitude^2.
cplx angular_spectrum_factor(double f2, double z, double lambda) {
    double inv2 = 1.0 / (lambda * lambda);
    if (f2 <= inv2) {
        double phase = 2.0 * M_PI * z * std::sqrt(inv2 - f2);
        return cplx(std::cos(phase), std::sin(phase));
    }
    // Evanescent: decays for either propagation direction.
    return cplx(std::exp(-2.0 * M_PI * std::abs(z) * std::sqrt(f2 - inv2)), 0.0);
}

/// Support width of the field along each axis, ignoring samples below
/// 1e-12 of the peak magnitude. Returns 0 for an empty field.
double support_extent(const ComplexField& f) {
    double peak = 0.0;
    for (const auto& s : f.samples) peak = std::max(peak, std::abs(s));
    if (!(peak > 0.0)) return 0.0;
    double thresh = 1e-12 * peak;
    int n = f.grid.n;
    if (f.grid.dims == 1) {
        int lo = n, hi = -1;
        for (int i = 0; i < n; ++i)
            if (std::abs(f.samples[i]) > thresh) {
                lo = std::min(lo, i);
                hi = std::max(hi, i);
            }
        return hi < lo ? 0.0 : double(hi - lo + 1) * f.grid.dx;
    }
    int xlo = n, xhi = -1, ylo = n, yhi = -1;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            if (std::abs(f.at(iy, ix)) > thresh) {
                xlo = std::min(xlo, ix);
                xhi = std::max(xhi, ix);
                ylo = std::min(ylo, iy);
                yhi = std::max(yhi, iy);
            }
    if (xhi < xlo) return 0.0;
    return std::max(double(xhi - xlo + 1), double(yhi - ylo + 1)) * f.grid.dx;
}

}  // namespace

double wraparound_safe_extent(const Grid& g, double lambda, double z) {
    return g.extent() - std::abs(z) * lambda / g.dx;
}

ComplexField propagate_angular_spectrum(const ComplexField& f, double z) {
    check_finite(f, "propagate_angular_spectrum");
    ComplexField out = f;
    int n = f.grid.n;
    double dx = f.grid.dx, lambda = f.wavelength;
    if (f.grid.dims == 1) {
        fft::transform_1d(out.samples.data(), n, fft::kForward);
        for (int k = 0; k < n; ++k) {
            double fx = fft_freq(k, n, dx);
            out.samples[k] *= angular_spectrum_factor(fx * fx, z, lambda) / double(n);
        }
        fft::transform_1d(out.samples.data(), n, fft::kBackward);
    } else {
        fft::transform_2d(out.samples.data(), n, fft::kForward);
        double norm = 1.0 / (double(n) * double(n));
        for (int ky = 0; ky < n; ++ky) {
            double fy = fft_freq(ky, n, dx);
            for (int kx = 0; kx < n; ++kx) {
                double fx = fft_freq(kx, n, dx);
                out.at(ky, kx) *= angular_spectrum_factor(fx * fx + fy * fy, z, lambda) * norm;
            }
        }
        fft::transform_2d(out.samples.data(), n, fft::kBackward);
    }
    return out;
}

ComplexField apply_fourier_system(const ComplexField& f, double focal) {
    if (!(focal > 0.0))
        throw std::invalid_argument("apply_fourier_system: focal length must be positive");
    check_finite(f, "apply_fourier_system");
    int n = f.grid.n;
    double dx = f.grid.dx, lambda = f.wavelength;
    Grid out_grid(f.grid.dims, n, lambda * focal / (double(n) * dx));
    ComplexField out(out_grid, lambda);

    // The centered-grid kernel exp(-i 2pi x_out x_in / (lambda f)) reduces to
    // a standard DFT after checkerboard pre/post phases:
    //   out[k] = s * (-1)^k * DFT[ E * (-1)^j ][k],  s = (dx/sqrt(lambda f))^dims * e^{-i pi n dims / 2}.
    double ang = -M_PI * double(n) / 2.0 * double(f.grid.dims);
    cplx scale = std::pow(dx / std::sqrt(lambda * focal), f.grid.dims) *
                 cplx(std::cos(ang), std::sin(ang));
    if (f.grid.dims == 1) {
        for (int j = 0; j < n; ++j) out.samples[j] = f.samples[j] * double(1 - 2 * (j & 1));
        fft::transform_1d(out.samples.data(), n, fft::kForward);
        for (int k = 0; k < n; ++k) out.samples[k] *= scale * double(1 - 2 * (k & 1));
    } else {
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                out.at(iy, ix) = f.at(iy, ix) * double(1 - 2 * ((ix + iy) & 1));
        fft::transform_2d(out.samples.data(), n, fft::kForward);
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx)
                out.at(ky, kx) *= scale * double(1 - 2 * ((kx + ky) & 1));
    }
    return out;
}

ComplexField apply_element(const ComplexField& f, const Element& e) {
    if (const auto* fs = std::get_if<FreeSpace>(&e)) {
        double support = support_extent(f);
        double safe = wraparound_safe_extent(f.grid, f.wavelength, fs->z);
        if (support > 0.0 && support > safe) {
            std::ostringstream msg;
            msg << "free-space propagation over z=" << fs->z << " m may wrap on this grid: "
                << "field support " << support << " m exceeds the safe extent " << safe << " m";
            warnings::emit(msg.str());
        }
        return propagate_angular_spectrum(f, fs->z);
    }
    if (const auto* ln = std::get_if<ThinLens>(&e)) {
        if (!(ln->f > 0.0)) throw std::invalid_argument("thin lens: focal length must be positive");
        ComplexField out = f;
        double c = -M_PI / (f.wavelength * ln->f);
        int n = f.grid.n;
        if (f.grid.dims == 1) {
            for (int i = 0; i < n; ++i) {
                double x = f.grid.coord(i);
                double ph = c * x * x;
                out.samples[i] *= cplx(std::cos(ph), std::sin(ph));
            }
        } else {
            for (int iy = 0; iy < n; ++iy) {
                double y = f.grid.coord(iy);
                for (int ix = 0; ix < n; ++ix) {
                    double x = f.grid.coord(ix);
                    double ph = c * (x * x + y * y);
                    out.at(iy, ix) *= cplx(std::cos(ph), std::sin(ph));
                }
            }
        }
        return out;
    }
    if (const auto* ap = std::get_if<ApertureStop>(&e)) {
        if (!(ap->D > 0.0)) throw std::invalid_argument("aperture: D must be positive");
        ComplexField out = f;
        int n = f.grid.n;
        if (f.grid.dims == 1) {
            for (int i = 0; i < n; ++i)
                if (std::abs(f.grid.coord(i)) > ap->D / 2) out.samples[i] = 0.0;
        } else {
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix)
                    if (std::hypot(f.grid.coord(ix), f.grid.coord(iy)) > ap->D / 2)
                        out.at(iy, ix) = 0.0;
        }
        return out;
    }
    if (const auto* ts = std::get_if<TransmissionScreen>(&e)) {
        if (ts->grid != f.grid)
            throw std::invalid_argument("transmission screen: grid does not match field grid");
        ComplexField out = f;
        for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] *= ts->t[i];
        return out;
    }
    return apply_fourier_system(f, std::get<FourierSystem>(e).f);
}

ComplexField apply_train(const ComplexField& f, const OpticalTrain& t) {
    if (t.elements.empty()) throw std::invalid_argument("apply_train: empty train");
    ComplexField cur = f;
    for (const auto& e : t.elements) cur = apply_element(cur, e);
    return cur;
}

Grid train_output_grid(const OpticalTrain& t, const Grid& in, double lambda) {
    Grid g = in;
    for (const auto& e : t.elements)
        if (const auto* fs = std::get_if<FourierSystem>(&e))
            g = Grid(g.dims, g.n, lambda * fs->f / (double(g.n) * g.dx));
    return g;
}

std::vector<cplx> ImpulseResponseMatrix::apply(const std::vector<cplx>& in) const {
    if (int(in.size()) != in_grid.n)
        throw std::invalid_argument("impulse matrix apply: input length mismatch");
    std::vector<cplx> out(std::size_t(out_grid.n), cplx(0.0));
    for (int o = 0; o < out_grid.n; ++o) {
        cplx acc(0.0);
        const cplx* row = h.data() + std::size_t(o) * in_grid.n;
        for (int i = 0; i < in_grid.n; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
    return out;
}

ImpulseResponseMatrix impulse_matrix(const OpticalTrain& t, const Grid& in_grid, double lambda) {
    if (in_grid.dims != 1)
        throw std::invalid_argument("impulse_matrix: 1D grids only");
    Grid out_grid = train_output_grid(t, in_grid, lambda);
    if (std::size_t(in_grid.n) * std::size_t(out_grid.n) > (std::size_t(1) << 22))
        throw std::invalid_argument("impulse_matrix: size guard exceeded (n_in*n_out > 2^22)");
    ImpulseResponseMatrix m;
    m.in_grid = in_grid;
    m.out_grid = out_grid;
    m.h.assign(std::size_t(in_grid.n) * out_grid.n, cplx(0.0));
    // Column j: train response to the unit sample at x_j. By linearity the
    // matrix-vector product then reproduces apply_train exactly, and the
    // continuous quadrature weight dx_in is absorbed (h_cont*dx = column).
    ComplexField impulse(in_grid, lambda);
    for (int j = 0; j < in_grid.n; ++j) {
        std::fill(impulse.samples.begin(), impulse.samples.end(), cplx(0.0));
        impulse.samples[j] = 1.0;
        ComplexField resp = apply_train(impulse, t);
        for (int o = 0; o < out_grid.n; ++o) m.at(o, j) = resp.samples[o];
    }
    return m;
}

ImpulseResponseMatrix impulse_matrix(const OpticalTrain& t, const Grid& in_grid,
                                     const Grid& out_grid, double lambda) {
    ImpulseResponseMatrix m = impulse_matrix(t, in_grid, lambda);
    if (m.out_grid != out_grid)
        throw std::invalid_argument("impulse_matrix: requested out_grid does not match the train's output grid");
    return m;
}

}  // namespace gd
