#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ghostdiff/field.hpp"
#include "ghostdiff/propagation.hpp"

namespace gd {

/// Intensity-fluctuation correlation G(x1, x2) = <I1 I2> - <I1><I2>.
struct CorrelationMap {
    Grid x1_grid, x2_grid;
    Eigen::MatrixXd G;  // rows index x1, columns x2
    Eigen::VectorXd mean1, mean2;
    long frames_used = 0;
};

/// Streaming G estimator over frames, 1D detector grids (full matrix).
///
/// Frames are partitioned into kBlocks contiguous blocks by frame index;
/// per-block partial sums make the result independent of worker scheduling
/// (bit-identical for any worker count when blocks are worker-owned) and
/// feed the jackknife error estimate. Within a block, rank-1 updates are
/// batched into small matrix products purely for speed.
class CorrelationAccumulator {
  public:
    static constexpr int kBlocks = 20;
    static constexpr int kBatch = 64;

    CorrelationAccumulator(const Grid& g1, const Grid& g2, long planned_frames,
                           bool track_second_moment = true);

    /// Sequential use: frames are numbered in arrival order.
    void accumulate(const IntensityMap& i1, const IntensityMap& i2);
    /// Parallel-deterministic use: the caller supplies the global frame index.
    void accumulate_indexed(const IntensityMap& i1, const IntensityMap& i2, long frame_index);
    /// Fold another accumulator over the same grids and frame plan into
    /// this one (both sides' pending batches are flushed first).
    void merge(CorrelationAccumulator& other);

    CorrelationMap finalize();

    /// Per-entry standard error of G by delete-one-block jackknife; when
    /// `peak_normalized`, each replicate is rescaled to unit peak first so
    /// the error of the normalization is propagated.
    Eigen::MatrixXd jackknife_se(bool peak_normalized);
    /// Per-entry standard error from the frame-wise variance of the product
    /// I1*I2 (the spec'd cheap estimate; ignores the mean-product term).
    Eigen::MatrixXd naive_se();

    long frames() const { return frames_total_; }
    long planned_frames() const { return planned_; }
    int block_of(long frame_index) const;
    const Grid& grid1() const { return g1_; }
    const Grid& grid2() const { return g2_; }

  private:
    void flush();
    void totals(Eigen::MatrixXd& sum_ii, Eigen::VectorXd& s1, Eigen::VectorXd& s2) const;

    Grid g1_, g2_;
    long planned_ = 0, per_block_ = 0, frames_total_ = 0, next_frame_ = 0;
    bool track2_ = true;
    std::vector<Eigen::MatrixXd> sum_ii_, sum_ii2_;  // per block
    std::vector<Eigen::VectorXd> sum1_, sum2_;
    std::vector<long> count_;
    Eigen::MatrixXd bx_, by_, bx2_, by2_;  // pending batch columns
    int pending_block_ = -1, pending_ = 0;
};

/// 2D-detector variant: full G over (R^2)x(R^2) is infeasible, so only the
/// fixed-x1 cut map G(c1, x2), the fixed-x2 cut map G(x1, c2) and the
/// diagonal G(x, x) are accumulated, each a full detector map.
class CutCorrelationAccumulator {
  public:
    static constexpr int kBlocks = 20;

    CutCorrelationAccumulator(const Grid& g, long planned_frames, std::size_t c1, std::size_t c2);

    void accumulate_indexed(const IntensityMap& i1, const IntensityMap& i2, long frame_index);
    void merge(const CutCorrelationAccumulator& other);

    struct Result {
        Grid grid;
        std::size_t c1, c2;
        std::vector<double> g_x2cut;  // G(c1, x2) over the detector
        std::vector<double> g_x1cut;  // G(x1, c2)
        std::vector<double> g_diag;   // G(x, x)
        std::vector<double> mean1, mean2;
        long frames_used = 0;
    };
    Result finalize() const;
    int block_of(long frame_index) const;

  private:
    Grid g_;
    long planned_ = 0, per_block_ = 0;
    std::size_t c1_, c2_;
    std::vector<std::vector<double>> row_, col_, diag_, s1_, s2_;  // per block
    std::vector<long> count_;
};

/// Gaussian-moment-theorem oracle: for circular Gaussian fields,
/// G = |<E1* E2>|^2. Streaming estimator over field frames.
class FieldMomentAccumulator {
  public:
    FieldMomentAccumulator(const Grid& g1, const Grid& g2);
    void accumulate(const ComplexField& e1, const ComplexField& e2);
    /// |mean|^2, peak-normalized when requested.
    CorrelationMap finalize(bool peak_normalized = true) const;
    long frames() const { return frames_; }

  private:
    Grid g1_, g2_;
    Eigen::MatrixXcd sum_;
    long frames_ = 0;
};

CorrelationMap gaussian_moment_oracle(const std::vector<ComplexField>& e1_frames,
                                      const std::vector<ComplexField>& e2_frames);

/// Object-plane field correlation models for the quadrature evaluations.
struct FieldCorrelationModel {
    enum class Kind { classical, entangled };
    Kind kind = Kind::classical;
    Grid grid;                // 1D object-plane grid
    Eigen::VectorXd envelope; // A(x) >= 0
    Eigen::VectorXd g_lag;    // classical: coherence kernel vs lag in samples
    bool lattice_wrap = false;  // g_lag is a periodic lattice correlation
    double sigma = 0.0;       // entangled: width of the delta stand-in (meters)

    /// Gamma[i][j]: classical A_i A_j g(i-j); entangled A_i delta_sigma(x_i - x_j).
    Eigen::MatrixXd gamma() const;
};

FieldCorrelationModel classical_model(const Grid& grid, const Eigen::VectorXd& envelope,
                                      const Eigen::VectorXd& g_lag, bool lattice_wrap = false);
FieldCorrelationModel entangled_model(const Grid& grid, const Eigen::VectorXd& envelope,
                                      double sigma);

/// Quadrature evaluation of the two correlation structures. The classical
/// form conjugates the arm-1 response; the entangled form does not — that
/// sign is the single structural difference between the two.
///   classical:  G(x1,x2) = |sum h1*(x1,a) h2(x2,b) Gamma(a,b)|^2
///   entangled:  G(x1,x2) = |sum h1(x1,a) h2(x2,b) Gamma(a,b)|^2
/// Peak-normalized by default; pass false to keep the physical scale (the
/// scale a Monte Carlo estimate with the same Gamma converges to).
CorrelationMap analytic_g_classical(const FieldCorrelationModel& gamma,
                                    const ImpulseResponseMatrix& h1,
                                    const ImpulseResponseMatrix& h2,
                                    bool peak_normalized = true);
CorrelationMap analytic_g_entangled(const FieldCorrelationModel& gamma,
                                    const ImpulseResponseMatrix& h1,
                                    const ImpulseResponseMatrix& h2,
                                    bool peak_normalized = true);

/// Single quadrature column G(:, fixed_x2) of the classical form, without
/// building the full output matrix (cheap at large n).
std::vector<double> analytic_g_classical_x1cut(const FieldCorrelationModel& gamma,
                                               const ImpulseResponseMatrix& h1,
                                               const ImpulseResponseMatrix& h2,
                                               int fixed_x2_index);

enum class CutAxis {
    along_x2,  // fixed x1, scan x2 (a row)
    along_x1,  // fixed x2, scan x1 (a column)
};

std::vector<double> cut(const CorrelationMap& map, CutAxis axis, int fixed_index);

/// G(x1, c2) / (<I1>(x1) <I2>(c2)) — the normalized correlation cut, flat in
/// the factorized (coherent) limit and fringed in ghost mode.
std::vector<double> normalized_cut(const CorrelationMap& map, int fixed_x2_index);

/// sigma2/sigma1 of the singular value spectrum: the factorization detector.
double rank_ratio(const Eigen::MatrixXd& g);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Row-reflected copy: out(i, :) = in(reflect_index(i), :).
Eigen::MatrixXd reflect_first_axis(const Eigen::MatrixXd& g);

}  // namespace gd
