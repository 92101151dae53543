#pragma once

#include <vector>

#include "ghostdiff/field.hpp"

namespace gd::stats {

/// Neumaier-compensated accumulator for order-robust reductions.
struct Kahan {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

/// sigma_I / <I> over all samples of all frames restricted to `roi`
/// (sample indices; empty roi means the whole grid).
double speckle_contrast(const std::vector<IntensityMap>& frames,
                        const std::vector<std::size_t>& roi = {});

/// FWHM (meters) of the peak-normalized intensity autocovariance.
/// Uses the unbiased linear estimator (zero-padded FFT, lag-count weights) —
/// the circular estimator underestimates widths that approach the window.
/// 2D maps are reduced row-wise and averaged over rows, so the result is the
/// width of a horizontal cut through the correlation peak. Throws on flat maps.
double autocorrelation_width(const IntensityMap& m);

/// Same measure with the autocovariance averaged over an ensemble of frames;
/// use >= 100 frames for stable speckle-size estimates.
double autocorrelation_width_ensemble(const std::vector<IntensityMap>& frames);

/// Kolmogorov-Smirnov distance between `samples` and the exponential
/// distribution with the given mean.
double ks_statistic_exponential(std::vector<double> samples, double mean);

struct VisibilityResult {
    double value = 0.0;       // decile contrast of the pooled window values
    double score = 0.0;       // periodicity score at the expected spacing
    bool peak_found = false;  // score cleared the gate (fringes, not envelope/speckle)
};

/// Fringe visibility of a profile with centered coordinates, measured over
/// the two symmetric windows [wlo, whi) and [n-whi, n-wlo). `value` is the
/// decile contrast of the pooled window values (lower decile clamped at
/// zero). `score` asks whether the windows are periodic at the expected
/// spacing: each side is detrended by a one-period moving average and the
/// normalized autocovariance of the residual at full-period lags is compared
/// against half-period lags (each averaged over lag-1..lag+1), so fringes
/// score strongly positive while smooth envelopes and speckle hover near
/// zero. `peak_found` is score >= 0.15; callers that must distinguish
/// "fringes at this period" from unrelated structure gate on it. Requires
/// period > 1 sample and at least 3 periods per window.
VisibilityResult fringe_visibility(const std::vector<double>& profile,
                                   double period_samples, int wlo, int whi);

/// RMS difference of the two profiles after each is scaled to unit peak,
/// normalized by the RMS of the scaled reference.
double nrms_peak_normalized(const std::vector<double>& profile,
                            const std::vector<double>& reference);

/// Plain RMS difference of the two profiles after each is scaled to unit peak.
double rms_peak_normalized(const std::vector<double>& a, const std::vector<double>& b);

/// Michelson contrast (U - L)/(U + L) of the mean upper/lower `frac` quantile
/// values; L is clamped at zero so Monte Carlo undershoot cannot inflate it.
double quantile_contrast(const std::vector<double>& values, double frac = 0.1);

/// Centered moving average with shrinking windows at the edges.
std::vector<double> moving_average(const std::vector<double>& v, int window);

/// Mean of the lowest/highest `frac` fraction of the values.
double lower_quantile_mean(std::vector<double> v, double frac);
double upper_quantile_mean(std::vector<double> v, double frac);

}  // namespace gd::stats
