#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "ghostdiff/correlation.hpp"
#include "ghostdiff/elements.hpp"
#include "ghostdiff/field.hpp"
#include "ghostdiff/propagation.hpp"
#include "ghostdiff/speckle.hpp"

using namespace gd;

namespace {

IntensityMap map_from(const Grid& g, const std::vector<double>& v) {
    IntensityMap m;
    m.grid = g;
    m.values = v;
    return m;
}

std::vector<IntensityMap> random_maps(const Grid& g, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    std::vector<IntensityMap> out;
    for (int k = 0; k < count; ++k) {
        std::vector<double> v(g.count());
        for (double& x : v) x = expo(rng);
        out.push_back(map_from(g, v));
    }
    return out;
}

/// Direct O(N n^2) reference: G = <I1 I2^T> - <I1><I2>^T.
Eigen::MatrixXd direct_g(const std::vector<IntensityMap>& a, const std::vector<IntensityMap>& b) {
    int n1 = int(a[0].values.size()), n2 = int(b[0].values.size());
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n1, n2);
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(n1), s2 = Eigen::VectorXd::Zero(n2);
    for (std::size_t k = 0; k < a.size(); ++k) {
        Eigen::Map<const Eigen::VectorXd> va(a[k].values.data(), n1);
        Eigen::Map<const Eigen::VectorXd> vb(b[k].values.data(), n2);
        sum += va * vb.transpose();
        s1 += va;
        s2 += vb;
    }
    double N = double(a.size());
    return sum / N - (s1 / N) * (s2 / N).transpose();
}

ComplexField random_field(const Grid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, M_SQRT1_2);
    ComplexField f(g, 532e-9);
    for (auto& s : f.samples) s = cplx(gauss(rng), gauss(rng));
    return f;
}

}  // namespace

TEST_CASE("correlation accumulator matches the direct estimator exactly") {
    Grid g1{1, 16, 1e-5}, g2{1, 16, 1e-5};
    int N = 150;  // exercises several batches and blocks
    std::vector<IntensityMap> a = random_maps(g1, N, 1), b = random_maps(g2, N, 2);
    CorrelationAccumulator acc(g1, g2, N);
    for (int k = 0; k < N; ++k) acc.accumulate(a[std::size_t(k)], b[std::size_t(k)]);
    CorrelationMap m = acc.finalize();
    Eigen::MatrixXd want = direct_g(a, b);
    CHECK((m.G - want).cwiseAbs().maxCoeff() < 1e-12 * want.cwiseAbs().maxCoeff());
    CHECK(m.frames_used == N);
    for (int i = 0; i < g1.n; ++i) {
        double mean = 0.0;
        for (const auto& fr : a) mean += fr.values[std::size_t(i)];
        CHECK(m.mean1(i) == doctest::Approx(mean / N).epsilon(1e-12));
    }
}

TEST_CASE("indexed accumulation and merging reproduce the sequential result") {
    Grid g{1, 12, 1e-5};
    int N = 97;  // odd count: splits cross batch boundaries mid-block
    std::vector<IntensityMap> a = random_maps(g, N, 3), b = random_maps(g, N, 4);

    CorrelationAccumulator seq(g, g, N);
    for (int k = 0; k < N; ++k) seq.accumulate(a[std::size_t(k)], b[std::size_t(k)]);
    CorrelationMap want = seq.finalize();

    // Distribute whole blocks across three accumulators (the worker-owned
    // pattern the class documents as scheduling-independent), then merge.
    CorrelationAccumulator s0(g, g, N), s1(g, g, N), s2(g, g, N);
    CorrelationAccumulator* parts[3] = {&s0, &s1, &s2};
    for (int k = 0; k < N; ++k) {
        int owner = seq.block_of(k) % 3;
        parts[owner]->accumulate_indexed(a[std::size_t(k)], b[std::size_t(k)], k);
    }
    s0.merge(s1);
    s0.merge(s2);
    CorrelationMap got = s0.finalize();
    CHECK(got.frames_used == N);
    CHECK((got.G - want.G).cwiseAbs().maxCoeff() == 0.0);  // bit-identical per contract
    CHECK((got.mean1 - want.mean1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("statistically identical arms give zero fluctuation correlation of the means") {
    Grid g{1, 8, 1e-5};
    // I2 == I1 frame by frame: G should equal the covariance of I with itself,
    // positive on the diagonal; constant frames instead give exactly zero.
    std::vector<double> flat(std::size_t(g.count()), 2.5);
    CorrelationAccumulator acc(g, g, 10);
    for (int k = 0; k < 10; ++k) acc.accumulate(map_from(g, flat), map_from(g, flat));
    CorrelationMap m = acc.finalize();
    CHECK(m.G.cwiseAbs().maxCoeff() < 1e-14);
    for (int i = 0; i < g.n; ++i) CHECK(m.mean1(i) == doctest::Approx(2.5));
}

TEST_CASE("jackknife error shrinks like one over sqrt frames") {
    Grid g{1, 8, 1e-5};
    auto run = [&](int N) {
        std::vector<IntensityMap> a = random_maps(g, N, 7), b = random_maps(g, N, 8);
        CorrelationAccumulator acc(g, g, N);
        for (int k = 0; k < N; ++k) acc.accumulate(a[std::size_t(k)], b[std::size_t(k)]);
        acc.finalize();
        return acc.jackknife_se(false).mean();
    };
    double se_small = run(400), se_large = run(6400);
    // 16x the frames: expect 4x smaller errors, within statistical slack.
    CHECK(se_small / se_large == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("naive error bars track the sample variance of the intensity product") {
    Grid g{1, 8, 1e-5};
    int N = 500;
    std::vector<IntensityMap> a = random_maps(g, N, 11), b = random_maps(g, N, 12);
    CorrelationAccumulator acc(g, g, N);
    for (int k = 0; k < N; ++k) acc.accumulate(a[std::size_t(k)], b[std::size_t(k)]);
    acc.finalize();
    Eigen::MatrixXd se = acc.naive_se();
    // Reference at one entry: sd(I1_i * I2_j) / sqrt(N).
    int i = 1, j = 2;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < N; ++k) {
        double p = a[std::size_t(k)].values[std::size_t(i)] * b[std::size_t(k)].values[std::size_t(j)];
        s += p;
        s2 += p * p;
    }
    double mean_p = s / N;
    double var = s2 / N - mean_p * mean_p;  // population variance, as implemented
    CHECK(se(i, j) == doctest::Approx(std::sqrt(var / N)).epsilon(1e-6));
}

TEST_CASE("cut accumulator equals the corresponding slices of the full matrix") {
    Grid g{1, 10, 1e-5};
    int N = 120;
    std::size_t c1 = 3, c2 = 7;
    std::vector<IntensityMap> a = random_maps(g, N, 21), b = random_maps(g, N, 22);

    CorrelationAccumulator full(g, g, N);
    CutCorrelationAccumulator cuts(g, N, c1, c2);
    for (int k = 0; k < N; ++k) {
        full.accumulate(a[std::size_t(k)], b[std::size_t(k)]);
        cuts.accumulate_indexed(a[std::size_t(k)], b[std::size_t(k)], k);
    }
    CorrelationMap m = full.finalize();
    CutCorrelationAccumulator::Result r = cuts.finalize();
    REQUIRE(r.frames_used == N);
    for (int x2 = 0; x2 < g.n; ++x2)
        CHECK(r.g_x2cut[std::size_t(x2)] ==
              doctest::Approx(m.G(int(c1), x2)).epsilon(1e-12));
    for (int x1 = 0; x1 < g.n; ++x1)
        CHECK(r.g_x1cut[std::size_t(x1)] ==
              doctest::Approx(m.G(x1, int(c2))).epsilon(1e-12));
    for (int x = 0; x < g.n; ++x)
        CHECK(r.g_diag[std::size_t(x)] == doctest::Approx(m.G(x, x)).epsilon(1e-12));
    for (int x = 0; x < g.n; ++x)
        CHECK(r.mean1[std::size_t(x)] == doctest::Approx(m.mean1(x)).epsilon(1e-12));
}

TEST_CASE("cut merge combines disjoint frame ranges") {
    Grid g{1, 8, 1e-5};
    int N = 60;
    std::vector<IntensityMap> a = random_maps(g, N, 31), b = random_maps(g, N, 32);
    CutCorrelationAccumulator whole(g, N, 2, 5), lo(g, N, 2, 5), hi(g, N, 2, 5);
    for (int k = 0; k < N; ++k) {
        whole.accumulate_indexed(a[std::size_t(k)], b[std::size_t(k)], k);
        (k < N / 2 ? lo : hi).accumulate_indexed(a[std::size_t(k)], b[std::size_t(k)], k);
    }
    lo.merge(hi);
    CutCorrelationAccumulator::Result rw = whole.finalize(), rm = lo.finalize();
    CHECK(rm.frames_used == N);
    for (int x = 0; x < g.n; ++x) {
        CHECK(rm.g_x2cut[std::size_t(x)] == doctest::Approx(rw.g_x2cut[std::size_t(x)]).epsilon(1e-14));
        CHECK(rm.g_diag[std::size_t(x)] == doctest::Approx(rw.g_diag[std::size_t(x)]).epsilon(1e-14));
    }
}

TEST_CASE("field-moment oracle converges to the gaussian moment identity") {
    // For circular Gaussian speckle, the intensity covariance equals
    // |<E1* E2>|^2; with I2 == I1 the unnormalized G must match |Gamma|^2.
    Grid g{1, 32, 1e-5};
    SpeckleSourceConfig cfg;
    cfg.method = SpeckleMethod::spectral;
    cfg.lambda = 532e-9;
    cfg.z = 0.395;
    cfg.D0 = 1e-3;
    int N = 4000;
    CorrelationAccumulator intensity_acc(g, g, N);
    FieldMomentAccumulator moment_acc(g, g);
    std::vector<ComplexField> frames1, frames2;
    for (int k = 0; k < N; ++k) {
        ComplexField f = generate_speckle_frame(cfg, g, 77, k).field;
        intensity_acc.accumulate(intensity(f), intensity(f));
        moment_acc.accumulate(f, f);
        if (k < 1000) {
            frames1.push_back(f);
            frames2.push_back(f);
        }
    }
    CorrelationMap gi = intensity_acc.finalize();
    CorrelationMap gm = moment_acc.finalize(false);
    double peak = gm.G.maxCoeff();
    REQUIRE(peak > 0.0);
    // Same statistic, different estimator noise: 10% at the peak scale.
    CHECK((gi.G - gm.G).cwiseAbs().maxCoeff() / peak < 0.10);

    CorrelationMap batch = gaussian_moment_oracle(frames1, frames2);
    CHECK(batch.frames_used == 1000);
    CHECK(batch.G.maxCoeff() == doctest::Approx(1.0));  // peak-normalized
}

TEST_CASE("quadrature with identity arms returns the squared field correlation") {
    Grid g{1, 16, 1e-5};
    Eigen::VectorXd env = Eigen::VectorXd::Ones(g.n);
    Eigen::VectorXd g_lag(g.n);
    for (int u = 0; u < g.n; ++u) g_lag(u) = std::exp(-0.1 * u * u);
    FieldCorrelationModel model = classical_model(g, env, g_lag);
    Eigen::MatrixXd gamma = model.gamma();

    ImpulseResponseMatrix id;
    id.in_grid = g;
    id.out_grid = g;
    id.h.assign(std::size_t(g.n) * g.n, cplx(0.0));
    for (int i = 0; i < g.n; ++i) id.at(i, i) = 1.0;
    CorrelationMap m = analytic_g_classical(model, id, id, false);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            CHECK(m.G(i, j) == doctest::Approx(gamma(i, j) * gamma(i, j)).epsilon(1e-12));
}

TEST_CASE("negating one detector coordinate swaps the classical and entangled forms") {
    // With a real object-plane correlation, conjugating arm 1 is the same as
    // evaluating it at the mirrored detector point, so the two quadrature
    // forms are exact reflections of each other.
    Grid g{1, 64, 12e-6};
    double lambda = 532e-9, focal = 0.05;
    PhaseObject obj = make_phase_object(PhaseDescriptor{PhaseDoubleSlit{M_PI, 48e-6, 120e-6}}, g);
    OpticalTrain arm1{{FourierSystem{focal}}};
    OpticalTrain arm2{{TransmissionScreen{g, transmission(obj)}, FourierSystem{focal}}};
    ImpulseResponseMatrix h1 = impulse_matrix(arm1, g, lambda);
    ImpulseResponseMatrix h2 = impulse_matrix(arm2, g, lambda);

    SpeckleSourceConfig src;
    src.method = SpeckleMethod::spectral;
    src.lambda = lambda;
    src.z = 0.395;
    src.D0 = 5.84e-3;
    Eigen::VectorXd g_lag = Eigen::Map<const Eigen::VectorXd>(
        spectral_lattice_correlation(src, g).data(), g.n);
    FieldCorrelationModel model =
        classical_model(g, Eigen::VectorXd::Ones(g.n), g_lag, /*lattice_wrap=*/true);

    CorrelationMap mc = analytic_g_classical(model, h1, h2);
    CorrelationMap me = analytic_g_entangled(model, h1, h2);
    Eigen::MatrixXd reflected = reflect_first_axis(me.G);
    CHECK((mc.G - reflected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("x1-cut column shortcut matches the full quadrature") {
    Grid g{1, 32, 12e-6};
    Eigen::VectorXd env = Eigen::VectorXd::Ones(g.n);
    Eigen::VectorXd g_lag(g.n);
    for (int u = 0; u < g.n; ++u) g_lag(u) = std::exp(-0.05 * u * u);
    FieldCorrelationModel model = classical_model(g, env, g_lag);
    OpticalTrain ft{{FourierSystem{0.05}}};
    ImpulseResponseMatrix h = impulse_matrix(ft, g, 532e-9);
    CorrelationMap full = analytic_g_classical(model, h, h, false);
    int j = 20;
    std::vector<double> col = analytic_g_classical_x1cut(model, h, h, j);
    REQUIRE(int(col.size()) == g.n);
    // The shortcut is normalized to the cut's own peak; match that scale.
    double ref_peak = full.G.col(j).maxCoeff();
    REQUIRE(ref_peak > 0.0);
    for (int i = 0; i < g.n; ++i)
        CHECK(col[std::size_t(i)] == doctest::Approx(full.G(i, j) / ref_peak).epsilon(1e-10));
}

TEST_CASE("coherent illumination factorizes the correlation matrix") {
    // A deterministic field with random per-frame global phase gives
    // G(x1,x2) ~ I1(x1) I2(x2) up to noise: rank ratio must collapse.
    Grid g{1, 24, 1e-5};
    ComplexField base = random_field(g, 99);
    std::mt19937_64 rng(100);
    std::uniform_real_distribution<double> uni(0.0, 2 * M_PI);
    std::exponential_distribution<double> expo(1.0);
    int N = 300;
    CorrelationAccumulator acc(g, g, N);
    for (int k = 0; k < N; ++k) {
        double amp = expo(rng);  // fluctuating power, fixed spatial mode
        std::vector<double> v(std::size_t(g.count()));
        for (int i = 0; i < g.n; ++i) v[std::size_t(i)] = amp * std::norm(base.at(i));
        acc.accumulate(map_from(g, v), map_from(g, v));
    }
    CorrelationMap m = acc.finalize();
    CHECK(rank_ratio(m.G) < 1e-10);

    // An uncorrelated-pixel matrix is far from rank one.
    Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(g.n, g.n);
    CHECK(rank_ratio(diag) == doctest::Approx(1.0));
}

TEST_CASE("map utilities slice rows and columns in the declared orientation") {
    Grid g{1, 8, 1e-5};
    CorrelationMap m;
    m.x1_grid = g;
    m.x2_grid = g;
    m.G = Eigen::MatrixXd::Zero(g.n, g.n);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) m.G(i, j) = 10.0 * i + j;
    m.mean1 = Eigen::VectorXd::Constant(g.n, 2.0);
    m.mean2 = Eigen::VectorXd::Constant(g.n, 4.0);

    std::vector<double> row = cut(m, CutAxis::along_x2, 3);
    std::vector<double> col = cut(m, CutAxis::along_x1, 5);
    for (int j = 0; j < g.n; ++j) CHECK(row[std::size_t(j)] == doctest::Approx(30.0 + j));
    for (int i = 0; i < g.n; ++i) CHECK(col[std::size_t(i)] == doctest::Approx(10.0 * i + 5));

    std::vector<double> norm = normalized_cut(m, 5);
    for (int i = 0; i < g.n; ++i)
        CHECK(norm[std::size_t(i)] == doctest::Approx((10.0 * i + 5) / 8.0));

    Eigen::MatrixXd r = reflect_first_axis(m.G);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            CHECK(r(i, j) == doctest::Approx(m.G(reflect_index(i, g.n), j)));

    std::vector<double> u{1.0, 2.0, 3.0}, v{2.0, 4.0, 6.0}, w{-1.0, 0.0, 1.0};
    CHECK(cosine_similarity(u, v) == doctest::Approx(1.0));
    CHECK(std::abs(cosine_similarity(u, w)) < 0.5);
}
