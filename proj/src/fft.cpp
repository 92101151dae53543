#include "ghostdiff/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace gd::fft {

namespace {

// FFTW planning is not thread-safe; fftw_execute_dft on distinct arrays is.
// Plans are created once per (rank, n, sign) with FFTW_UNALIGNED so they can
// be executed on any caller buffer.
std::mutex plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;

fftw_plan get_plan(int rank, int n, int sign, cplx* data) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_tuple(rank, n, sign);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_plan plan = rank == 1
        ? fftw_plan_dft_1d(n, p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED)
        : fftw_plan_dft_2d(n, n, p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw std::runtime_error("fft: FFTW planning failed");
    plan_cache.emplace(key, plan);
    return plan;
}

void run(int rank, cplx* data, int n, int sign) {
    if (n <= 0) throw std::invalid_argument("fft: transform length must be positive");
    fftw_plan plan = get_plan(rank, n, sign, data);
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, p, p);
}

}  // namespace

void transform_1d(cplx* data, int n, int sign) { run(1, data, n, sign); }
void transform_2d(cplx* data, int n, int sign) { run(2, data, n, sign); }

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace gd::fft
