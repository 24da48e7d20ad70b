#pragma once

#include "cvqkd/types.hpp"

namespace cvqkd::fft {

// Thread-safe wrappers around FFTW (plans are cached and guarded; execution
// runs concurrently). inverse() includes the 1/N factor.
void forward(const cvec& in, cvec& out);
void inverse(const cvec& in, cvec& out);
cvec forward(const cvec& in);
cvec inverse(const cvec& in);

// smallest 5-smooth size >= n (FFTW is fast on 2^a 3^b 5^c)
std::size_t next_fast_size(std::size_t n);

}  // namespace cvqkd::fft
