#pragma once

#include "ghostdiff/field.hpp"

namespace gd::fft {

inline constexpr int kForward = -1;   // e^{-i2pi...}, FFTW sign convention
inline constexpr int kBackward = +1;

/// In-place unnormalized complex DFT of length n.
/// Thread-safe: plans are cached under a lock, execution is concurrent.
void transform_1d(cplx* data, int n, int sign);

/// In-place unnormalized complex DFT of an n x n row-major array.
void transform_2d(cplx* data, int n, int sign);

int next_pow2(int n);

}  // namespace gd::fft
