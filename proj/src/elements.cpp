#include "ghostdiff/elements.hpp"

#include <cmath>

namespace gd {

namespace {

/// 1D phase profile along x; 2D objects extrude it along y.
std::vector<double> phase_profile(const PhaseDescriptor& d, const Grid& g, double& extent) {
    std::vector<double> p(std::size_t(g.n), 0.0);
    if (const auto* s = std::get_if<PhaseStep>(&d)) {
        extent = s->width;
        for (int i = 0; i < g.n; ++i) {
            double x = g.coord(i);
            if (x >= 0.0 && x < s->width) p[i] = s->phi;
        }
    } else if (const auto* gr = std::get_if<PhaseGrating>(&d)) {
        extent = gr->width;
        for (int i = 0; i < g.n; ++i) {
            double x = g.coord(i);
            if (std::abs(x) <= gr->width / 2) {
                // stripe parity of the half-period containing x
                long k = long(std::floor(x / (gr->period / 2)));
                if (((k % 2) + 2) % 2 == 1) p[i] = gr->phi;
            }
        }
    } else if (const auto* ds = std::get_if<PhaseDoubleSlit>(&d)) {
        extent = ds->separation + ds->slit_width;
        for (int i = 0; i < g.n; ++i) {
            double x = g.coord(i);
            if (std::abs(std::abs(x) - ds->separation / 2) <= ds->slit_width / 2) p[i] = ds->phi;
        }
    } else {
        const auto& c = std::get<PhaseCustom>(d);
        if (int(c.phase.size()) != g.n)
            throw std::invalid_argument("phase object: custom map length does not match grid");
        p = c.phase;
        extent = g.extent();
    }
    return p;
}

std::vector<double> amplitude_profile(const AmplitudeDescriptor& d, const Grid& g, double& extent) {
    std::vector<double> t(std::size_t(g.n), 0.0);
    if (const auto* ds = std::get_if<AmplitudeDoubleSlit>(&d)) {
        extent = ds->separation + ds->slit_width;
        for (int i = 0; i < g.n; ++i) {
            double x = g.coord(i);
            if (std::abs(std::abs(x) - ds->separation / 2) <= ds->slit_width / 2) t[i] = 1.0;
        }
    } else {
        const auto& ss = std::get<AmplitudeSingleSlit>(d);
        extent = ss.slit_width;
        for (int i = 0; i < g.n; ++i)
            if (std::abs(g.coord(i)) <= ss.slit_width / 2) t[i] = 1.0;
    }
    return t;
}

void check_resolvable(double extent, const Grid& g) {
    if (extent < 8 * g.dx)
        throw std::invalid_argument("object resolution guard: object extent spans fewer than 8 grid samples");
}

template <typename T>
std::vector<T> extrude(const std::vector<T>& row, const Grid& g) {
    if (g.dims == 1) return row;
    std::vector<T> out(g.count());
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) out[std::size_t(iy) * g.n + ix] = row[ix];
    return out;
}

}  // namespace

PhaseObject make_phase_object(const PhaseDescriptor& d, const Grid& grid) {
    PhaseObject obj;
    obj.grid = grid;
    std::vector<double> row = phase_profile(d, grid, obj.extent);
    check_resolvable(obj.extent, grid);
    obj.phase = extrude(row, grid);
    return obj;
}

AmplitudeObject make_amplitude_object(const AmplitudeDescriptor& d, const Grid& grid) {
    AmplitudeObject obj;
    obj.grid = grid;
    std::vector<double> row = amplitude_profile(d, grid, obj.extent);
    check_resolvable(obj.extent, grid);
    obj.trans = extrude(row, grid);
    return obj;
}

std::vector<cplx> transmission(const PhaseObject& obj) {
    std::vector<cplx> t(obj.phase.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = cplx(std::cos(obj.phase[i]), std::sin(obj.phase[i]));
    return t;
}

std::vector<double> transmission(const AmplitudeObject& obj) { return obj.trans; }

std::vector<double> diaphragm_mask(const Diaphragm& d, const Grid& grid) {
    if (!(d.D > 0.0)) throw std::invalid_argument("diaphragm: D must be positive");
    std::vector<double> m(grid.count(), 0.0);
    if (grid.dims == 1) {
        for (int i = 0; i < grid.n; ++i)
            if (std::abs(grid.coord(i)) <= d.D / 2) m[i] = 1.0;
    } else {
        for (int iy = 0; iy < grid.n; ++iy) {
            double y = grid.coord(iy);
            for (int ix = 0; ix < grid.n; ++ix) {
                double x = grid.coord(ix);
                if (std::hypot(x, y) <= d.D / 2) m[std::size_t(iy) * grid.n + ix] = 1.0;
            }
        }
    }
    return m;
}

}  // namespace gd
