#include "ghostdiff/speckle.hpp"

#include <cmath>
#include <stdexcept>

#include "ghostdiff/fft.hpp"
#include "ghostdiff/rng.hpp"

namespace gd {

namespace {

void check_config(const SpeckleSourceConfig& cfg) {
    if (!(cfg.lambda > 0.0)) throw std::invalid_argument("speckle source: lambda must be positive");
    if (cfg.target_dx_speckle > 0.0) {
        if (cfg.method != SpeckleMethod::spectral)
            throw std::invalid_argument("speckle source: target_dx_speckle applies to the spectral method only");
        return;
    }
    if (!(cfg.D0 > 0.0) || !(cfg.z > 0.0))
        throw std::invalid_argument("speckle source: D0 and z must be positive");
}

/// Speckle must be resolvable (>= 2.5 samples FWHM) unless it is deliberately
/// unresolvable — wider than half the window, the coherent regime.
void check_resolution(const SpeckleSourceConfig& cfg, const Grid& grid) {
    double fwhm = expected_speckle_fwhm(cfg, grid.dims);
    if (fwhm >= grid.extent() / 2) return;
    if (fwhm < 2.5 * grid.dx)
        throw std::invalid_argument(
            "speckle resolution guard: expected speckle FWHM is below 2.5 grid samples");
}

/// Band limit of the physical method: every spatial frequency that can reach
/// the observation window from the source support, with 15% margin, capped
/// just under Nyquist. Frequencies outside it only produce wrapped copies on
/// the padded grid, so they are removed before propagation.
double physical_band_limit(const SpeckleSourceConfig& cfg, const Grid& grid) {
    double geometric = 1.15 * (grid.extent() / 2 + cfg.D0 / 2) / (cfg.lambda * cfg.z);
    return std::min(geometric, 0.45 / grid.dx);
}

int physical_pad_count(const SpeckleSourceConfig& cfg, const Grid& grid, double f_lim) {
    double spread = cfg.z * cfg.lambda * f_lim;
    double need = (grid.extent() + cfg.D0 + 2.0 * spread) / grid.dx + 16.0;
    return fft::next_pow2(int(std::ceil(need)));
}

ComplexField generate_physical(const SpeckleSourceConfig& cfg, const Grid& grid,
                               std::uint64_t seed, long frame_index) {
    double f_lim = physical_band_limit(cfg, grid);
    int npad = physical_pad_count(cfg, grid, f_lim);
    if (grid.dims == 2 && std::size_t(npad) * npad > (std::size_t(1) << 26))
        throw std::invalid_argument(
            "physical speckle: 2D padded grid exceeds the memory guard; use the spectral method");

    rng::Stream rs(seed, std::uint64_t(frame_index));
    Grid pad(grid.dims, npad, grid.dx);
    ComplexField field(pad, cfg.lambda);
    if (grid.dims == 1) {
        for (int i = 0; i < npad; ++i)
            if (std::abs(pad.coord(i)) <= cfg.D0 / 2) field.samples[i] = rs.next_circular_gaussian();
        fft::transform_1d(field.samples.data(), npad, fft::kForward);
        for (int k = 0; k < npad; ++k) {
            double fx = (k < (npad + 1) / 2 ? k : k - npad) / (double(npad) * grid.dx);
            if (std::abs(fx) > f_lim) {
                field.samples[k] = 0.0;
                continue;
            }
            double inv2 = 1.0 / (cfg.lambda * cfg.lambda);
            double phase = 2.0 * M_PI * cfg.z * std::sqrt(std::max(inv2 - fx * fx, 0.0));
            field.samples[k] *= cplx(std::cos(phase), std::sin(phase)) / double(npad);
        }
        fft::transform_1d(field.samples.data(), npad, fft::kBackward);
    } else {
        for (int iy = 0; iy < npad; ++iy)
            for (int ix = 0; ix < npad; ++ix)
                if (std::hypot(pad.coord(ix), pad.coord(iy)) <= cfg.D0 / 2)
                    field.at(iy, ix) = rs.next_circular_gaussian();
        fft::transform_2d(field.samples.data(), npad, fft::kForward);
        double inv2 = 1.0 / (cfg.lambda * cfg.lambda);
        double norm = 1.0 / (double(npad) * double(npad));
        for (int ky = 0; ky < npad; ++ky) {
            double fy = (ky < (npad + 1) / 2 ? ky : ky - npad) / (double(npad) * grid.dx);
            for (int kx = 0; kx < npad; ++kx) {
                double fx = (kx < (npad + 1) / 2 ? kx : kx - npad) / (double(npad) * grid.dx);
                double f2 = fx * fx + fy * fy;
                if (f2 > f_lim * f_lim) {
                    field.at(ky, kx) = 0.0;
                    continue;
                }
                double phase = 2.0 * M_PI * cfg.z * std::sqrt(std::max(inv2 - f2, 0.0));
                field.at(ky, kx) *= cplx(std::cos(phase), std::sin(phase)) * norm;
            }
        }
        fft::transform_2d(field.samples.data(), npad, fft::kBackward);
    }

    // Crop the centered observation window.
    ComplexField out(grid, cfg.lambda);
    int off = npad / 2 - grid.n / 2;
    if (grid.dims == 1) {
        for (int i = 0; i < grid.n; ++i) out.samples[i] = field.samples[off + i];
    } else {
        for (int iy = 0; iy < grid.n; ++iy)
            for (int ix = 0; ix < grid.n; ++ix) out.at(iy, ix) = field.at(off + iy, off + ix);
    }
    return out;
}

/// Normalized filter spectrum S[k] with mean 1 over all bins, so generated
/// frames have unit mean intensity and C[0] = 1.
std::vector<double> spectral_filter(const SpeckleSourceConfig& cfg, const Grid& grid) {
    std::size_t nn = grid.count();
    std::vector<double> s(nn, 0.0);
    int n = grid.n;
    auto freq = [&](int k) { return (k < (n + 1) / 2 ? k : k - n) / (double(n) * grid.dx); };
    if (cfg.target_dx_speckle > 0.0) {
        double l2 = cfg.target_dx_speckle * cfg.target_dx_speckle;
        if (grid.dims == 1) {
            for (int k = 0; k < n; ++k) {
                double f = freq(k);
                s[k] = std::exp(-2.0 * M_PI * M_PI * l2 * f * f);
            }
        } else {
            for (int ky = 0; ky < n; ++ky)
                for (int kx = 0; kx < n; ++kx) {
                    double f2 = freq(kx) * freq(kx) + freq(ky) * freq(ky);
                    s[std::size_t(ky) * n + kx] = std::exp(-2.0 * M_PI * M_PI * l2 * f2);
                }
        }
    } else {
        // Van Cittert-Zernike: the far-field coherence spectrum is the source
        // intensity profile mapped to frequency f = xi/(lambda z).
        double rf = cfg.D0 / (2.0 * cfg.lambda * cfg.z);
        if (grid.dims == 1) {
            for (int k = 0; k < n; ++k)
                if (std::abs(freq(k)) <= rf) s[k] = 1.0;
        } else {
            for (int ky = 0; ky < n; ++ky)
                for (int kx = 0; kx < n; ++kx)
                    if (std::hypot(freq(kx), freq(ky)) <= rf) s[std::size_t(ky) * n + kx] = 1.0;
        }
    }
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= double(nn);
    if (!(mean > 0.0))
        throw std::invalid_argument(
            "spectral speckle: coherence filter is empty on this grid (source too small; "
            "use the physical method)");
    for (auto& v : s) v /= mean;
    return s;
}

ComplexField generate_spectral(const SpeckleSourceConfig& cfg, const Grid& grid,
                               std::uint64_t seed, long frame_index) {
    std::vector<double> s = spectral_filter(cfg, grid);
    rng::Stream rs(seed, std::uint64_t(frame_index));
    ComplexField field(grid, cfg.lambda);
    for (std::size_t i = 0; i < s.size(); ++i)
        field.samples[i] = rs.next_circular_gaussian() * std::sqrt(s[i]);
    double root = std::sqrt(double(grid.count()));
    if (grid.dims == 1)
        fft::transform_1d(field.samples.data(), grid.n, fft::kBackward);
    else
        fft::transform_2d(field.samples.data(), grid.n, fft::kBackward);
    for (auto& v : field.samples) v /= root;
    return field;
}

}  // namespace

double expected_speckle_size(double lambda, double z, double D0) {
    if (!(lambda > 0.0) || !(z > 0.0) || !(D0 > 0.0))
        throw std::invalid_argument("expected_speckle_size: all arguments must be positive");
    return lambda * z / D0;
}

double speckle_count(double D, double dx_speckle) {
    if (!(D > 0.0) || !(dx_speckle > 0.0))
        throw std::invalid_argument("speckle_count: arguments must be positive");
    double r = D / dx_speckle;
    return r * r;
}

double expected_speckle_fwhm(const SpeckleSourceConfig& cfg, int dims) {
    if (cfg.target_dx_speckle > 0.0) {
        // |g|^2 of a Gaussian g(u) = exp(-u^2/(2 l^2)) has FWHM 2 l sqrt(ln 2).
        return 2.0 * cfg.target_dx_speckle * std::sqrt(std::log(2.0));
    }
    double scale = expected_speckle_size(cfg.lambda, cfg.z, cfg.D0);
    return (dims == 1 ? kSpeckleFwhm1D : kSpeckleFwhm2D) * scale;
}

SpeckleFrame generate_speckle_frame(const SpeckleSourceConfig& cfg, const Grid& grid,
                                    std::uint64_t seed, long frame_index) {
    check_config(cfg);
    check_resolution(cfg, grid);
    SpeckleFrame fr;
    fr.seed = seed;
    fr.frame_index = frame_index;
    fr.field = cfg.method == SpeckleMethod::physical
                   ? generate_physical(cfg, grid, seed, frame_index)
                   : generate_spectral(cfg, grid, seed, frame_index);
    return fr;
}

std::pair<ComplexField, ComplexField> beamsplit(const ComplexField& f) {
    ComplexField a = f;
    double r = 1.0 / std::sqrt(2.0);
    for (auto& v : a.samples) v *= r;
    return {a, a};
}

std::vector<double> spectral_lattice_correlation(const SpeckleSourceConfig& cfg, const Grid& grid) {
    if (grid.dims != 1)
        throw std::invalid_argument("spectral_lattice_correlation: 1D grids only");
    std::vector<double> s = spectral_filter(cfg, grid);
    std::vector<cplx> buf(s.begin(), s.end());
    fft::transform_1d(buf.data(), grid.n, fft::kBackward);
    std::vector<double> c(std::size_t(grid.n));
    for (int u = 0; u < grid.n; ++u) c[u] = buf[u].real() / double(grid.n);
    return c;
}

std::vector<double> slit_coherence_kernel(const SpeckleSourceConfig& cfg, const Grid& grid) {
    check_config(cfg);
    std::vector<double> g(std::size_t(grid.n));
    for (int k = 0; k < grid.n; ++k) {
        double u = k * grid.dx * cfg.D0 / (cfg.lambda * cfg.z);
        g[k] = u == 0.0 ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
    }
    return g;
}

}  // namespace gd
