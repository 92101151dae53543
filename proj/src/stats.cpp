#include "ghostdiff/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "ghostdiff/fft.hpp"

namespace gd::stats {

namespace {

double mean_of(const std::vector<double>& v) {
    Kahan k;
    for (double x : v) k.add(x);
    return k.value() / double(v.size());
}

/// Interpolated lag (in samples) where the normalized profile first crosses 1/2.
double half_crossing(const std::vector<double>& c) {
    for (std::size_t u = 1; u < c.size(); ++u) {
        if (c[u] < 0.5) {
            double frac = (c[u - 1] - 0.5) / (c[u - 1] - c[u]);
            return double(u - 1) + frac;
        }
    }
    throw std::runtime_error(
        "autocorrelation_width: correlation does not decay to half within the grid window");
}

/// Autocovariance FWHM from row profiles via the unbiased linear estimator:
/// zero-pad each row to >= 2n so the FFT correlation is linear, average the
/// padded power spectra over all rows, then divide lag u by its overlap count
/// (n - u). 2D maps contribute every row, so the result is the width of a
/// horizontal cut through the correlation peak.
///
/// With an ensemble, the per-pixel ensemble mean is subtracted (the proper
/// covariance); a single map falls back to its spatial mean.
double width_rows(const std::vector<const IntensityMap*>& frames) {
    const Grid& g = frames[0]->grid;
    int n = g.n;
    int rows = g.dims == 2 ? n : 1;
    int m = fft::next_pow2(2 * n);
    std::vector<double> mean(g.count(), 0.0);
    if (frames.size() >= 2) {
        for (const auto* f : frames)
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f->values[i];
        for (auto& v : mean) v /= double(frames.size());
    } else {
        std::fill(mean.begin(), mean.end(), mean_of(frames[0]->values));
    }
    std::vector<double> psd(m, 0.0);
    std::vector<cplx> buf(m);
    for (const auto* f : frames) {
        for (int r = 0; r < rows; ++r) {
            std::size_t off = std::size_t(r) * n;
            std::fill(buf.begin(), buf.end(), cplx(0.0));
            for (int i = 0; i < n; ++i) buf[i] = f->values[off + i] - mean[off + i];
            fft::transform_1d(buf.data(), m, fft::kForward);
            for (int k = 0; k < m; ++k) psd[k] += std::norm(buf[k]);
        }
    }
    for (int k = 0; k < m; ++k) buf[k] = psd[k];
    fft::transform_1d(buf.data(), m, fft::kBackward);
    std::vector<double> c(n);
    for (int u = 0; u < n; ++u) c[u] = buf[u].real() / double(n - u);
    if (!(c[0] > 0.0))
        throw std::runtime_error("autocorrelation_width: flat map has no correlation width");
    double c0 = c[0];
    for (int u = 0; u < n; ++u) c[u] /= c0;
    return 2.0 * half_crossing(c) * g.dx;
}

}  // namespace

double speckle_contrast(const std::vector<IntensityMap>& frames,
                        const std::vector<std::size_t>& roi) {
    if (frames.size() < 2)
        throw std::invalid_argument("speckle_contrast: need at least 2 frames");
    for (const auto& f : frames)
        if (f.grid != frames[0].grid)
            throw std::invalid_argument("speckle_contrast: mismatched grids");
    std::vector<std::size_t> idx = roi;
    if (idx.empty()) {
        idx.resize(frames[0].values.size());
        std::iota(idx.begin(), idx.end(), 0);
    }
    if (idx.empty()) throw std::invalid_argument("speckle_contrast: empty region");
    Kahan s1, s2;
    for (const auto& f : frames) {
        for (std::size_t i : idx) {
            double v = f.values[i];
            s1.add(v);
            s2.add(v * v);
        }
    }
    double cnt = double(frames.size()) * double(idx.size());
    double mu = s1.value() / cnt;
    double var = s2.value() / cnt - mu * mu;
    if (var < 0.0) var = 0.0;
    return mu > 0.0 ? std::sqrt(var) / mu : 0.0;
}

double autocorrelation_width(const IntensityMap& m) {
    std::vector<const IntensityMap*> one{&m};
    return width_rows(one);
}

double autocorrelation_width_ensemble(const std::vector<IntensityMap>& frames) {
    if (frames.empty()) throw std::invalid_argument("autocorrelation_width: no frames");
    std::vector<const IntensityMap*> ps;
    ps.reserve(frames.size());
    for (const auto& f : frames) {
        if (f.grid != frames[0].grid)
            throw std::invalid_argument("autocorrelation_width: mismatched grids");
        ps.push_back(&f);
    }
    return width_rows(ps);
}

double ks_statistic_exponential(std::vector<double> samples, double mean) {
    if (samples.empty() || !(mean > 0.0))
        throw std::invalid_argument("ks_statistic_exponential: need samples and positive mean");
    std::sort(samples.begin(), samples.end());
    double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double cdf = 1.0 - std::exp(-samples[i] / mean);
        d = std::max(d, std::max(cdf - double(i) / n, double(i + 1) / n - cdf));
    }
    return d;
}

std::vector<double> moving_average(const std::vector<double>& v, int window) {
    if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
    int n = int(v.size());
    int h = window / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + v[i];
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - h), hi = std::min(n - 1, i + h);
        out[i] = (prefix[hi + 1] - prefix[lo]) / double(hi - lo + 1);
    }
    return out;
}

double lower_quantile_mean(std::vector<double> v, double frac) {
    if (v.empty()) throw std::invalid_argument("quantile mean of empty vector");
    std::size_t k = std::max<std::size_t>(1, std::size_t(std::floor(frac * double(v.size()))));
    std::nth_element(v.begin(), v.begin() + k - 1, v.end());
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += v[i];
    return s / double(k);
}

double upper_quantile_mean(std::vector<double> v, double frac) {
    for (auto& x : v) x = -x;
    return -lower_quantile_mean(std::move(v), frac);
}

namespace {

// Centered moving average over an odd window with mirror-reflected ends
// (edge sample excluded from its own reflection), so the detrend does not
// bend toward the boundary values.
std::vector<double> reflect_moving_average(const std::vector<double>& w, int k) {
    int m = int(w.size());
    int pad = k / 2;
    std::vector<double> wp;
    wp.reserve(std::size_t(m + 2 * pad));
    for (int i = pad; i >= 1; --i) wp.push_back(w[std::size_t(i)]);
    wp.insert(wp.end(), w.begin(), w.end());
    for (int i = m - 2; i >= m - 1 - pad; --i) wp.push_back(w[std::size_t(i)]);
    std::vector<double> prefix(wp.size() + 1, 0.0);
    for (std::size_t i = 0; i < wp.size(); ++i) prefix[i + 1] = prefix[i] + wp[i];
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        out[std::size_t(i)] = (prefix[std::size_t(i + k)] - prefix[std::size_t(i)]) / double(k);
    return out;
}

// Correlation of a residual against itself at an integer lag: segment means
// subtracted per side, normalized by the full-residual variance.
double residual_autocorr(const std::vector<double>& r, double lag_request) {
    int m = int(r.size());
    int lag = std::max(1, int(std::lround(lag_request)));
    if (lag >= m) return 0.0;
    double var = 0.0, mu = mean_of(r);
    for (double x : r) var += (x - mu) * (x - mu);
    var /= double(m);
    if (!(var > 0.0)) return 0.0;
    int cnt = m - lag;
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < cnt; ++i) {
        ma += r[std::size_t(i)];
        mb += r[std::size_t(i + lag)];
    }
    ma /= double(cnt);
    mb /= double(cnt);
    double s = 0.0;
    for (int i = 0; i < cnt; ++i)
        s += (r[std::size_t(i)] - ma) * (r[std::size_t(i + lag)] - mb);
    return s / double(cnt) / var;
}

constexpr double kFringeScoreGate = 0.15;

}  // namespace

VisibilityResult fringe_visibility(const std::vector<double>& profile,
                                   double period_samples, int wlo, int whi) {
    int n = int(profile.size());
    if (!(period_samples > 1.0))
        throw std::invalid_argument("fringe_visibility: period must exceed one sample");
    if (wlo < 0 || whi <= wlo || whi > n)
        throw std::invalid_argument("fringe_visibility: window outside profile");
    int m = whi - wlo;
    if (double(m) < 3.0 * period_samples)
        throw std::invalid_argument("fringe_visibility: window holds fewer than 3 fringe periods");

    // Two symmetric sides of the centered profile; the left one reversed so
    // both run from the inner edge outward.
    std::array<std::vector<double>, 2> sides;
    sides[0].assign(profile.begin() + wlo, profile.begin() + whi);
    sides[1].assign(profile.begin() + (n - whi), profile.begin() + (n - wlo));
    std::reverse(sides[1].begin(), sides[1].end());

    std::vector<double> pooled;
    pooled.reserve(sides[0].size() + sides[1].size());
    for (const auto& s : sides) pooled.insert(pooled.end(), s.begin(), s.end());

    int k = std::max(3, int(std::lround(period_samples)) | 1);
    double score = 0.0;
    for (const auto& w : sides) {
        std::vector<double> env = reflect_moving_average(w, k);
        std::vector<double> r(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = w[i] - env[i];
        double s_full = 0.0, s_half = 0.0;
        for (int d = -1; d <= 1; ++d) {
            s_full += residual_autocorr(r, period_samples + d);
            s_half += residual_autocorr(r, period_samples / 2.0 + d);
        }
        score += 0.5 * (s_full - s_half) / 3.0;
    }
    score /= double(sides.size());

    double vis = quantile_contrast(pooled, 0.1);
    return {vis, score, score >= kFringeScoreGate};
}

namespace {

void scaled_difference_moments(const std::vector<double>& a, const std::vector<double>& b,
                               double& diff_ms, double& ref_ms) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("nrms_peak_normalized: size mismatch");
    double amax = 0.0, bmax = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        amax = std::max(amax, std::abs(a[i]));
        bmax = std::max(bmax, std::abs(b[i]));
    }
    if (!(amax > 0.0) || !(bmax > 0.0))
        throw std::invalid_argument("nrms_peak_normalized: zero profile");
    diff_ms = ref_ms = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double av = a[i] / amax, bv = b[i] / bmax;
        diff_ms += (av - bv) * (av - bv);
        ref_ms += bv * bv;
    }
    diff_ms /= double(a.size());
    ref_ms /= double(a.size());
}

}  // namespace

double nrms_peak_normalized(const std::vector<double>& profile,
                            const std::vector<double>& reference) {
    double diff_ms, ref_ms;
    scaled_difference_moments(profile, reference, diff_ms, ref_ms);
    return std::sqrt(diff_ms / ref_ms);
}

double rms_peak_normalized(const std::vector<double>& a, const std::vector<double>& b) {
    double diff_ms, ref_ms;
    scaled_difference_moments(a, b, diff_ms, ref_ms);
    return std::sqrt(diff_ms);
}

double quantile_contrast(const std::vector<double>& values, double frac) {
    double hi = upper_quantile_mean(values, frac);
    double lo = std::max(lower_quantile_mean(values, frac), 0.0);
    return hi + lo > 0.0 ? (hi - lo) / (hi + lo) : 0.0;
}

}  // namespace gd::stats
