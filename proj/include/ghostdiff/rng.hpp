#pragma once

#include <cmath>
#include <cstdint>

#include "ghostdiff/field.hpp"

namespace gd::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: the sequence is a pure function of (seed, stream_id),
/// so frame i can be generated on any worker in any order with identical bits.
class Stream {
  public:
    Stream(std::uint64_t seed, std::uint64_t stream_id)
        : state_(mix64(seed) ^ mix64(stream_id * 0x9e3779b97f4a7c15ULL + 0xd1b54a32d192ed03ULL)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform in (0, 1]: never 0, so log() below is safe.
    double next_unit() {
        return double((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Circular complex Gaussian, E|z|^2 = 1 (each quadrature has variance 1/2).
    cplx next_circular_gaussian() {
        double r = std::sqrt(-std::log(next_unit()));
        double th = 2.0 * M_PI * next_unit();
        return cplx(r * std::cos(th), r * std::sin(th));
    }

  private:
    std::uint64_t state_;
};

}  // namespace gd::rng
