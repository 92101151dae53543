#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "ghostdiff/elements.hpp"
#include "ghostdiff/field.hpp"

using namespace gd;

TEST_CASE("phase step covers one side of the axis") {
    Grid g{1, 64, 10e-6};
    double w = 200e-6;
    PhaseObject obj = make_phase_object(PhaseDescriptor{PhaseStep{M_PI / 2, w}}, g);
    CHECK(obj.extent == doctest::Approx(w));
    for (int i = 0; i < g.n; ++i) {
        double x = g.coord(i);
        double want = (x >= 0.0 && x < w) ? M_PI / 2 : 0.0;
        CHECK(obj.phase[std::size_t(i)] == doctest::Approx(want));
    }
}

TEST_CASE("phase grating alternates half-period stripes inside its width") {
    Grid g{1, 128, 10e-6};
    double period = 160e-6, width = 640e-6, phi = M_PI;
    PhaseObject obj = make_phase_object(PhaseDescriptor{PhaseGrating{phi, period, width}}, g);
    std::vector<int> flips;
    for (int i = 1; i < g.n; ++i) {
        double x0 = g.coord(i - 1), x1 = g.coord(i);
        if (std::abs(x0) > width / 2 || std::abs(x1) > width / 2) continue;
        if (obj.phase[std::size_t(i)] != obj.phase[std::size_t(i - 1)]) flips.push_back(i);
    }
    // Stripes are half-period wide, so consecutive transitions sit period/2 apart.
    int stripe_samples = int(std::lround(period / 2 / g.dx));
    REQUIRE(flips.size() >= 7);
    for (std::size_t k = 1; k < flips.size(); ++k)
        CHECK(flips[k] - flips[k - 1] == stripe_samples);
    // Outside the grating window the phase is zero.
    CHECK(obj.phase.front() == 0.0);
    CHECK(obj.phase.back() == 0.0);
    // Each stripe is phi or 0, half-period wide.
    for (double p : obj.phase) CHECK((p == 0.0 || p == doctest::Approx(phi)));
}

TEST_CASE("phase double slit marks two bands and keeps unit magnitude") {
    Grid g{1, 256, 6e-6};
    double a = 160e-6, d = 530e-6, phi = M_PI;
    PhaseObject obj = make_phase_object(PhaseDescriptor{PhaseDoubleSlit{phi, a, d}}, g);
    CHECK(obj.extent == doctest::Approx(d + a));
    for (int i = 0; i < g.n; ++i) {
        double x = g.coord(i);
        bool in_slit = std::abs(std::abs(x) - d / 2) <= a / 2;
        CHECK(obj.phase[std::size_t(i)] == doctest::Approx(in_slit ? phi : 0.0));
    }
    std::vector<cplx> t = transmission(obj);
    for (const cplx& v : t) CHECK(std::abs(v) == doctest::Approx(1.0));
    // pi phase means the slits multiply the field by -1.
    int c = g.n / 2;
    int slit_center = c + int(std::lround((d / 2) / g.dx));
    CHECK(t[std::size_t(slit_center)].real() == doctest::Approx(-1.0));
    CHECK(t[std::size_t(c)].real() == doctest::Approx(1.0));
}

TEST_CASE("amplitude slits are binary masks") {
    Grid g{1, 256, 6e-6};
    AmplitudeObject dd =
        make_amplitude_object(AmplitudeDescriptor{AmplitudeDoubleSlit{160e-6, 530e-6}}, g);
    AmplitudeObject ss = make_amplitude_object(AmplitudeDescriptor{AmplitudeSingleSlit{160e-6}}, g);
    for (double v : dd.trans) CHECK((v == 0.0 || v == 1.0));
    for (double v : ss.trans) CHECK((v == 0.0 || v == 1.0));
    double open_dd = 0.0, open_ss = 0.0;
    for (double v : dd.trans) open_dd += v;
    for (double v : ss.trans) open_ss += v;
    // Two slits pass roughly twice the single slit's area.
    CHECK(open_dd == doctest::Approx(2.0 * open_ss).epsilon(0.08));
    CHECK(transmission(ss) == ss.trans);
}

TEST_CASE("2d objects extrude the 1d profile along y") {
    Grid g{2, 64, 10e-6};
    PhaseObject obj = make_phase_object(PhaseDescriptor{PhaseDoubleSlit{M_PI, 100e-6, 240e-6}}, g);
    CHECK(obj.phase.size() == g.count());
    for (int iy = 1; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
            CHECK(obj.phase[std::size_t(iy) * g.n + ix] == obj.phase[std::size_t(ix)]);
}

TEST_CASE("custom phase map must match the grid") {
    Grid g{1, 64, 10e-6};
    std::vector<double> good(64, 0.25), bad(63, 0.25);
    PhaseObject obj = make_phase_object(PhaseDescriptor{PhaseCustom{good}}, g);
    CHECK(obj.phase == good);
    CHECK(obj.extent == doctest::Approx(g.extent()));
    CHECK_THROWS_AS(make_phase_object(PhaseDescriptor{PhaseCustom{bad}}, g),
                    std::invalid_argument);
}

TEST_CASE("resolution guard rejects objects thinner than 8 samples") {
    Grid g{1, 64, 10e-6};
    CHECK_THROWS_AS(make_phase_object(PhaseDescriptor{PhaseStep{M_PI, 70e-6}}, g),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_amplitude_object(AmplitudeDescriptor{AmplitudeSingleSlit{70e-6}}, g),
                    std::invalid_argument);
    CHECK_NOTHROW(make_phase_object(PhaseDescriptor{PhaseStep{M_PI, 90e-6}}, g));
}

TEST_CASE("diaphragm mask is a centered disk") {
    Grid g1{1, 64, 10e-6};
    std::vector<double> m1 = diaphragm_mask(Diaphragm{200e-6}, g1);
    for (int i = 0; i < g1.n; ++i)
        CHECK(m1[std::size_t(i)] == ((std::abs(g1.coord(i)) <= 100e-6) ? 1.0 : 0.0));

    Grid g2{2, 64, 10e-6};
    std::vector<double> m2 = diaphragm_mask(Diaphragm{300e-6}, g2);
    for (int iy = 0; iy < g2.n; ++iy)
        for (int ix = 0; ix < g2.n; ++ix) {
            double r = std::hypot(g2.coord(ix), g2.coord(iy));
            CHECK(m2[std::size_t(iy) * g2.n + ix] == ((r <= 150e-6) ? 1.0 : 0.0));
        }
    CHECK_THROWS_AS(diaphragm_mask(Diaphragm{0.0}, g1), std::invalid_argument);
}
