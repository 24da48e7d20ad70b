#include "cvqkd/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace cvqkd::fft {
namespace {

// Plan cache keyed by (size, direction). Plans are created with
// FFTW_ESTIMATE | FFTW_UNALIGNED so the new-array execute functions accept
// arbitrary heap buffers; fftw_execute_dft on a shared plan is thread-safe.
std::mutex plan_mutex;
std::map<std::pair<std::size_t, int>, fftw_plan> plan_cache;

fftw_plan get_plan(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(n, sign);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;
    // out-of-place plan; new-array execution must keep the same in/out
    // distinctness, so execute() never aliases the buffers
    cvec din(n), dout(n);
    auto* pi = reinterpret_cast<fftw_complex*>(din.data());
    auto* po = reinterpret_cast<fftw_complex*>(dout.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), pi, po, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_cache.emplace(key, plan);
    return plan;
}

void execute(const cvec& in, cvec& out, int sign) {
    const std::size_t n = in.size();
    if (n == 0) throw invalid_parameter("fft: empty input");
    fftw_plan plan = get_plan(n, sign);
    if (&in == &out) {
        cvec tmp(n);
        auto* pin = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
        fftw_execute_dft(plan, pin, reinterpret_cast<fftw_complex*>(tmp.data()));
        out = std::move(tmp);
        return;
    }
    out.resize(n);
    // 1-d out-of-place c2c execution leaves the input untouched
    auto* pin = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
    auto* pout = reinterpret_cast<fftw_complex*>(out.data());
    fftw_execute_dft(plan, pin, pout);
}

}  // namespace

void forward(const cvec& in, cvec& out) { execute(in, out, FFTW_FORWARD); }

void inverse(const cvec& in, cvec& out) {
    execute(in, out, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(in.size());
    for (auto& v : out) v *= scale;
}

cvec forward(const cvec& in) {
    cvec out;
    forward(in, out);
    return out;
}

cvec inverse(const cvec& in) {
    cvec out;
    inverse(in, out);
    return out;
}

std::size_t next_fast_size(std::size_t n) {
    if (n == 0) return 1;
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        while (r % 2 == 0) r /= 2;
        while (r % 3 == 0) r /= 3;
        while (r % 5 == 0) r /= 5;
        if (r == 1) return m;
    }
}

}  // namespace cvqkd::fft
