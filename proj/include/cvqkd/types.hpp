#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cvqkd {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

/// Uniformly sampled complex baseband waveform. Amplitudes are dimensionless;
/// after shot-noise calibration one quadrature unit of variance equals one
/// shot-noise unit (SNU).
struct ComplexSeries {
    cvec samples;
    double sample_rate = 0.0;  // Hz

    std::size_t size() const { return samples.size(); }
    double nyquist() const { return 0.5 * sample_rate; }
};

// Error taxonomy. Preconditions raise invalid_parameter; the rest are
// runtime conditions a batch driver is expected to catch per frame.
struct invalid_parameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct invalid_config : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct layout_mismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct length_mismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct band_empty : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct sync_failed : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct insufficient_samples : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degenerate_window : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degenerate_input : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct invalid_calibration : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct tracker_divergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cvqkd
