#include "ghostdiff/correlation.hpp"

#include <cmath>
#include <stdexcept>

namespace gd {

namespace {

Eigen::MatrixXcd to_eigen(const ImpulseResponseMatrix& m) {
    using RowMajor = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(m.h.data(), m.out_grid.n, m.in_grid.n);
}

Eigen::Map<const Eigen::VectorXd> as_vec(const IntensityMap& m) {
    return {m.values.data(), Eigen::Index(m.values.size())};
}

void peak_normalize(Eigen::MatrixXd& g) {
    double peak = g.maxCoeff();
    if (peak > 0.0) g /= peak;
}

}  // namespace

CorrelationAccumulator::CorrelationAccumulator(const Grid& g1, const Grid& g2,
                                               long planned_frames, bool track_second_moment)
    : g1_(g1), g2_(g2), planned_(planned_frames), track2_(track_second_moment) {
    if (g1.dims != 1 || g2.dims != 1)
        throw std::invalid_argument(
            "CorrelationAccumulator: full G matrices are 1D-only; use CutCorrelationAccumulator in 2D");
    if (planned_frames < 1)
        throw std::invalid_argument("CorrelationAccumulator: planned frame count must be >= 1");
    per_block_ = (planned_frames + kBlocks - 1) / kBlocks;
    sum_ii_.assign(kBlocks, Eigen::MatrixXd::Zero(g1.n, g2.n));
    if (track2_) sum_ii2_.assign(kBlocks, Eigen::MatrixXd::Zero(g1.n, g2.n));
    sum1_.assign(kBlocks, Eigen::VectorXd::Zero(g1.n));
    sum2_.assign(kBlocks, Eigen::VectorXd::Zero(g2.n));
    count_.assign(kBlocks, 0);
    bx_.resize(g1.n, kBatch);
    by_.resize(g2.n, kBatch);
    if (track2_) {
        bx2_.resize(g1.n, kBatch);
        by2_.resize(g2.n, kBatch);
    }
}

int CorrelationAccumulator::block_of(long frame_index) const {
    long b = frame_index / per_block_;
    return int(std::min<long>(b, kBlocks - 1));
}

void CorrelationAccumulator::flush() {
    if (pending_ == 0) return;
    int b = pending_block_;
    auto x = bx_.leftCols(pending_);
    auto y = by_.leftCols(pending_);
    sum_ii_[b].noalias() += x * y.transpose();
    sum1_[b].noalias() += x.rowwise().sum();
    sum2_[b].noalias() += y.rowwise().sum();
    if (track2_)
        sum_ii2_[b].noalias() += bx2_.leftCols(pending_) * by2_.leftCols(pending_).transpose();
    count_[b] += pending_;
    pending_ = 0;
}

void CorrelationAccumulator::accumulate_indexed(const IntensityMap& i1, const IntensityMap& i2,
                                                long frame_index) {
    if (i1.grid != g1_ || i2.grid != g2_)
        throw std::invalid_argument("CorrelationAccumulator: frame grids do not match");
    int b = block_of(frame_index);
    if (pending_ > 0 && (b != pending_block_ || pending_ == kBatch)) flush();
    pending_block_ = b;
    bx_.col(pending_) = as_vec(i1);
    by_.col(pending_) = as_vec(i2);
    if (track2_) {
        bx2_.col(pending_) = bx_.col(pending_).cwiseAbs2();
        by2_.col(pending_) = by_.col(pending_).cwiseAbs2();
    }
    ++pending_;
    ++frames_total_;
}

void CorrelationAccumulator::accumulate(const IntensityMap& i1, const IntensityMap& i2) {
    accumulate_indexed(i1, i2, next_frame_++);
}

void CorrelationAccumulator::merge(CorrelationAccumulator& other) {
    if (other.g1_ != g1_ || other.g2_ != g2_ || other.planned_ != planned_ ||
        other.track2_ != track2_)
        throw std::invalid_argument("CorrelationAccumulator: merge partners disagree on layout");
    flush();
    other.flush();
    for (int b = 0; b < kBlocks; ++b) {
        sum_ii_[b] += other.sum_ii_[b];
        if (track2_) sum_ii2_[b] += other.sum_ii2_[b];
        sum1_[b] += other.sum1_[b];
        sum2_[b] += other.sum2_[b];
        count_[b] += other.count_[b];
    }
    frames_total_ += other.frames_total_;
}

void CorrelationAccumulator::totals(Eigen::MatrixXd& sum_ii, Eigen::VectorXd& s1,
                                    Eigen::VectorXd& s2) const {
    sum_ii = Eigen::MatrixXd::Zero(g1_.n, g2_.n);
    s1 = Eigen::VectorXd::Zero(g1_.n);
    s2 = Eigen::VectorXd::Zero(g2_.n);
    for (int b = 0; b < kBlocks; ++b) {
        sum_ii += sum_ii_[b];
        s1 += sum1_[b];
        s2 += sum2_[b];
    }
}

CorrelationMap CorrelationAccumulator::finalize() {
    flush();
    if (frames_total_ < 2)
        throw std::runtime_error("CorrelationAccumulator: need at least 2 frames to estimate G");
    Eigen::MatrixXd sum_ii;
    Eigen::VectorXd s1, s2;
    totals(sum_ii, s1, s2);
    double n = double(frames_total_);
    CorrelationMap out;
    out.x1_grid = g1_;
    out.x2_grid = g2_;
    out.mean1 = s1 / n;
    out.mean2 = s2 / n;
    out.G = sum_ii / n - out.mean1 * out.mean2.transpose();
    out.frames_used = frames_total_;
    return out;
}

Eigen::MatrixXd CorrelationAccumulator::jackknife_se(bool peak_normalized) {
    flush();
    Eigen::MatrixXd sum_ii;
    Eigen::VectorXd s1, s2;
    totals(sum_ii, s1, s2);
    int used = 0;
    Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(g1_.n, g2_.n);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(g1_.n, g2_.n);
    for (int b = 0; b < kBlocks; ++b) {
        long nb = frames_total_ - count_[b];
        if (count_[b] == 0 || nb < 2) continue;
        double n = double(nb);
        Eigen::VectorXd r1 = (s1 - sum1_[b]) / n;
        Eigen::VectorXd r2 = (s2 - sum2_[b]) / n;
        Eigen::MatrixXd rep = (sum_ii - sum_ii_[b]) / n - r1 * r2.transpose();
        if (peak_normalized) peak_normalize(rep);
        m1 += rep;
        m2 += rep.cwiseAbs2();
        ++used;
    }
    if (used < 2)
        throw std::runtime_error("CorrelationAccumulator: too few populated blocks for a jackknife");
    double bb = double(used);
    Eigen::MatrixXd var = (m2 - m1.cwiseAbs2() / bb).cwiseMax(0.0);
    return ((bb - 1.0) / bb * var).cwiseSqrt();
}

Eigen::MatrixXd CorrelationAccumulator::naive_se() {
    flush();
    if (!track2_)
        throw std::runtime_error("CorrelationAccumulator: second moments were not tracked");
    Eigen::MatrixXd sum_ii;
    Eigen::VectorXd s1, s2;
    totals(sum_ii, s1, s2);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(g1_.n, g2_.n);
    for (int b = 0; b < kBlocks; ++b) sum_sq += sum_ii2_[b];
    double n = double(frames_total_);
    Eigen::MatrixXd mean_prod = sum_ii / n;
    Eigen::MatrixXd var = (sum_sq / n - mean_prod.cwiseAbs2()).cwiseMax(0.0);
    return (var / n).cwiseSqrt();
}

CutCorrelationAccumulator::CutCorrelationAccumulator(const Grid& g, long planned_frames,
                                                     std::size_t c1, std::size_t c2)
    : g_(g), planned_(planned_frames), c1_(c1), c2_(c2) {
    if (planned_frames < 1)
        throw std::invalid_argument("CutCorrelationAccumulator: planned frame count must be >= 1");
    if (c1 >= g.count() || c2 >= g.count())
        throw std::invalid_argument("CutCorrelationAccumulator: cut index out of range");
    per_block_ = (planned_frames + kBlocks - 1) / kBlocks;
    std::size_t nn = g.count();
    row_.assign(kBlocks, std::vector<double>(nn, 0.0));
    col_.assign(kBlocks, std::vector<double>(nn, 0.0));
    diag_.assign(kBlocks, std::vector<double>(nn, 0.0));
    s1_.assign(kBlocks, std::vector<double>(nn, 0.0));
    s2_.assign(kBlocks, std::vector<double>(nn, 0.0));
    count_.assign(kBlocks, 0);
}

int CutCorrelationAccumulator::block_of(long frame_index) const {
    return int(std::min<long>(frame_index / per_block_, kBlocks - 1));
}

void CutCorrelationAccumulator::accumulate_indexed(const IntensityMap& i1, const IntensityMap& i2,
                                                   long frame_index) {
    if (i1.grid != g_ || i2.grid != g_)
        throw std::invalid_argument("CutCorrelationAccumulator: frame grids do not match");
    int b = block_of(frame_index);
    double v1c = i1.values[c1_], v2c = i2.values[c2_];
    std::size_t nn = g_.count();
    auto& row = row_[b];
    auto& col = col_[b];
    auto& diag = diag_[b];
    auto& s1 = s1_[b];
    auto& s2 = s2_[b];
    for (std::size_t i = 0; i < nn; ++i) {
        double a = i1.values[i], c = i2.values[i];
        row[i] += v1c * c;
        col[i] += a * v2c;
        diag[i] += a * c;
        s1[i] += a;
        s2[i] += c;
    }
    ++count_[b];
}

void CutCorrelationAccumulator::merge(const CutCorrelationAccumulator& other) {
    if (other.g_ != g_ || other.planned_ != planned_ || other.c1_ != c1_ || other.c2_ != c2_)
        throw std::invalid_argument("CutCorrelationAccumulator: merge partners disagree on layout");
    std::size_t nn = g_.count();
    for (int b = 0; b < kBlocks; ++b) {
        for (std::size_t i = 0; i < nn; ++i) {
            row_[b][i] += other.row_[b][i];
            col_[b][i] += other.col_[b][i];
            diag_[b][i] += other.diag_[b][i];
            s1_[b][i] += other.s1_[b][i];
            s2_[b][i] += other.s2_[b][i];
        }
        count_[b] += other.count_[b];
    }
}

CutCorrelationAccumulator::Result CutCorrelationAccumulator::finalize() const {
    long frames = 0;
    for (long c : count_) frames += c;
    if (frames < 2)
        throw std::runtime_error("CutCorrelationAccumulator: need at least 2 frames to estimate G");
    std::size_t nn = g_.count();
    Result r;
    r.grid = g_;
    r.c1 = c1_;
    r.c2 = c2_;
    r.g_x2cut.assign(nn, 0.0);
    r.g_x1cut.assign(nn, 0.0);
    r.g_diag.assign(nn, 0.0);
    r.mean1.assign(nn, 0.0);
    r.mean2.assign(nn, 0.0);
    r.frames_used = frames;
    double n = double(frames);
    for (std::size_t i = 0; i < nn; ++i) {
        double row = 0, col = 0, diag = 0, a1 = 0, a2 = 0;
        for (int b = 0; b < kBlocks; ++b) {
            row += row_[b][i];
            col += col_[b][i];
            diag += diag_[b][i];
            a1 += s1_[b][i];
            a2 += s2_[b][i];
        }
        r.mean1[i] = a1 / n;
        r.mean2[i] = a2 / n;
        r.g_x2cut[i] = row / n;
        r.g_x1cut[i] = col / n;
        r.g_diag[i] = diag / n - r.mean1[i] * r.mean2[i];
    }
    // Subtract the mean products of the cut rows/columns.
    double m1c = r.mean1[c1_], m2c = r.mean2[c2_];
    for (std::size_t i = 0; i < nn; ++i) {
        r.g_x2cut[i] -= m1c * r.mean2[i];
        r.g_x1cut[i] -= r.mean1[i] * m2c;
    }
    return r;
}

FieldMomentAccumulator::FieldMomentAccumulator(const Grid& g1, const Grid& g2)
    : g1_(g1), g2_(g2), sum_(Eigen::MatrixXcd::Zero(g1.count(), g2.count())) {}

void FieldMomentAccumulator::accumulate(const ComplexField& e1, const ComplexField& e2) {
    if (e1.grid != g1_ || e2.grid != g2_)
        throw std::invalid_argument("FieldMomentAccumulator: frame grids do not match");
    Eigen::Map<const Eigen::VectorXcd> v1(e1.samples.data(), Eigen::Index(e1.samples.size()));
    Eigen::Map<const Eigen::VectorXcd> v2(e2.samples.data(), Eigen::Index(e2.samples.size()));
    sum_.noalias() += v1.conjugate() * v2.transpose();
    ++frames_;
}

CorrelationMap FieldMomentAccumulator::finalize(bool peak_normalized) const {
    if (frames_ < 2)
        throw std::runtime_error("FieldMomentAccumulator: need at least 2 frames");
    CorrelationMap out;
    out.x1_grid = g1_;
    out.x2_grid = g2_;
    out.G = (sum_ / double(frames_)).cwiseAbs2();
    out.frames_used = frames_;
    if (peak_normalized) peak_normalize(out.G);
    return out;
}

CorrelationMap gaussian_moment_oracle(const std::vector<ComplexField>& e1_frames,
                                      const std::vector<ComplexField>& e2_frames) {
    if (e1_frames.size() != e2_frames.size() || e1_frames.size() < 2)
        throw std::invalid_argument("gaussian_moment_oracle: need matched frame lists, length >= 2");
    FieldMomentAccumulator acc(e1_frames[0].grid, e2_frames[0].grid);
    for (std::size_t i = 0; i < e1_frames.size(); ++i)
        acc.accumulate(e1_frames[i], e2_frames[i]);
    return acc.finalize(true);
}

Eigen::MatrixXd FieldCorrelationModel::gamma() const {
    int n = grid.n;
    Eigen::MatrixXd g(n, n);
    if (kind == Kind::classical) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                int lag = lattice_wrap ? (i - j + n) % n : std::abs(i - j);
                g(i, j) = envelope(i) * envelope(j) * g_lag(lag);
            }
    } else {
        double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double u = grid.coord(i) - grid.coord(j);
                g(i, j) = envelope(i) * norm * std::exp(-u * u / (2.0 * sigma * sigma));
            }
    }
    return g;
}

FieldCorrelationModel classical_model(const Grid& grid, const Eigen::VectorXd& envelope,
                                      const Eigen::VectorXd& g_lag, bool lattice_wrap) {
    if (grid.dims != 1) throw std::invalid_argument("correlation model: 1D grids only");
    if (envelope.size() != grid.n || g_lag.size() != grid.n)
        throw std::invalid_argument("correlation model: envelope/kernel length mismatch");
    FieldCorrelationModel m;
    m.kind = FieldCorrelationModel::Kind::classical;
    m.grid = grid;
    m.envelope = envelope;
    m.g_lag = g_lag;
    m.lattice_wrap = lattice_wrap;
    return m;
}

FieldCorrelationModel entangled_model(const Grid& grid, const Eigen::VectorXd& envelope,
                                      double sigma) {
    if (grid.dims != 1) throw std::invalid_argument("correlation model: 1D grids only");
    if (envelope.size() != grid.n)
        throw std::invalid_argument("correlation model: envelope length mismatch");
    if (!(sigma > 0.0)) throw std::invalid_argument("correlation model: sigma must be positive");
    FieldCorrelationModel m;
    m.kind = FieldCorrelationModel::Kind::entangled;
    m.grid = grid;
    m.envelope = envelope;
    m.sigma = sigma;
    return m;
}

namespace {

CorrelationMap quadrature_g(const FieldCorrelationModel& model, const ImpulseResponseMatrix& h1,
                            const ImpulseResponseMatrix& h2, bool conjugate_h1,
                            bool peak_normalized) {
    if (h1.in_grid != model.grid || h2.in_grid != model.grid)
        throw std::invalid_argument("quadrature: correlation model grid must match the impulse-matrix input grids");
    Eigen::MatrixXcd m1 = to_eigen(h1);
    Eigen::MatrixXcd m2 = to_eigen(h2);
    Eigen::MatrixXcd gam = model.gamma().cast<cplx>();
    Eigen::MatrixXcd amp;
    if (conjugate_h1)
        amp.noalias() = m1.conjugate() * gam * m2.transpose();
    else
        amp.noalias() = m1 * gam * m2.transpose();
    CorrelationMap out;
    out.x1_grid = h1.out_grid;
    out.x2_grid = h2.out_grid;
    out.G = amp.cwiseAbs2();
    out.frames_used = 0;
    if (peak_normalized) peak_normalize(out.G);
    return out;
}

}  // namespace

CorrelationMap analytic_g_classical(const FieldCorrelationModel& gamma,
                                    const ImpulseResponseMatrix& h1,
                                    const ImpulseResponseMatrix& h2, bool peak_normalized) {
    return quadrature_g(gamma, h1, h2, true, peak_normalized);
}

CorrelationMap analytic_g_entangled(const FieldCorrelationModel& gamma,
                                    const ImpulseResponseMatrix& h1,
                                    const ImpulseResponseMatrix& h2, bool peak_normalized) {
    return quadrature_g(gamma, h1, h2, false, peak_normalized);
}

std::vector<double> analytic_g_classical_x1cut(const FieldCorrelationModel& gamma,
                                               const ImpulseResponseMatrix& h1,
                                               const ImpulseResponseMatrix& h2,
                                               int fixed_x2_index) {
    if (fixed_x2_index < 0 || fixed_x2_index >= h2.out_grid.n)
        throw std::out_of_range("analytic_g_classical_x1cut: fixed index out of range");
    Eigen::MatrixXcd m1 = to_eigen(h1);
    Eigen::MatrixXcd m2 = to_eigen(h2);
    Eigen::MatrixXcd gam = gamma.gamma().cast<cplx>();
    Eigen::VectorXcd h2row = m2.row(fixed_x2_index).transpose();
    Eigen::VectorXcd col = m1.conjugate() * (gam * h2row);
    std::vector<double> out(col.size());
    double peak = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        out[i] = std::norm(col(i));
        peak = std::max(peak, out[i]);
    }
    if (peak > 0.0)
        for (auto& v : out) v /= peak;
    return out;
}

std::vector<double> cut(const CorrelationMap& map, CutAxis axis, int fixed_index) {
    if (axis == CutAxis::along_x2) {
        if (fixed_index < 0 || fixed_index >= map.G.rows())
            throw std::out_of_range("cut: x1 index out of range");
        Eigen::VectorXd row = map.G.row(fixed_index).transpose();
        return {row.data(), row.data() + row.size()};
    }
    if (fixed_index < 0 || fixed_index >= map.G.cols())
        throw std::out_of_range("cut: x2 index out of range");
    Eigen::VectorXd col = map.G.col(fixed_index);
    return {col.data(), col.data() + col.size()};
}

std::vector<double> normalized_cut(const CorrelationMap& map, int fixed_x2_index) {
    if (map.mean1.size() != map.G.rows() || map.mean2.size() != map.G.cols())
        throw std::invalid_argument("normalized_cut: map carries no mean intensities");
    if (fixed_x2_index < 0 || fixed_x2_index >= map.G.cols())
        throw std::out_of_range("normalized_cut: x2 index out of range");
    double m2 = map.mean2(fixed_x2_index);
    std::vector<double> out(map.G.rows());
    for (Eigen::Index i = 0; i < map.G.rows(); ++i) {
        double denom = map.mean1(i) * m2;
        out[i] = denom > 0.0 ? map.G(i, fixed_x2_index) / denom : 0.0;
    }
    return out;
}

double rank_ratio(const Eigen::MatrixXd& g) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(g);
    const auto& s = svd.singularValues();
    if (s.size() < 2 || !(s(0) > 0.0)) return 0.0;
    return s(1) / s(0);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("cosine_similarity: size mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
    return dot / std::sqrt(na * nb);
}

Eigen::MatrixXd reflect_first_axis(const Eigen::MatrixXd& g) {
    Eigen::MatrixXd out(g.rows(), g.cols());
    int n = int(g.rows());
    for (int i = 0; i < n; ++i) out.row(i) = g.row(reflect_index(i, n));
    return out;
}

}  // namespace gd
