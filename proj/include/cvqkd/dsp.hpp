#pragma once

#include <span>

#include "cvqkd/types.hpp"

namespace cvqkd {

/// Root-raised-cosine pulse shaping filter, energy normalized so a matched
/// filter pair has unit symbol gain.
struct RrcFilter {
    double rolloff = 0.0;
    int span = 0;              // symbols
    int samples_per_symbol = 0;
    std::vector<double> taps;  // span*sps + 1 taps, symmetric

    int center() const { return span * samples_per_symbol / 2; }
};

RrcFilter design_rrc(double rolloff, int span_symbols, int samples_per_symbol);

// output(n) = x(n) * exp(j 2 pi f n / rate); |f| must stay below Nyquist
ComplexSeries frequency_shift(const ComplexSeries& x, double f_hz);

// Band-limited fractional resampling by a windowed-sinc polyphase
// interpolator (32 taps, Kaiser beta = 8). ratio in [0.5, 2.0]. Output
// sample m corresponds to input time m/ratio; the nominal rate becomes
// sample_rate * ratio and the length floor(n * ratio).
ComplexSeries resample(const ComplexSeries& x, double ratio);

struct TonePeak {
    double frequency = 0.0;  // Hz
    double power = 0.0;      // interpolated peak, ~|amplitude|^2 for a clean tone
};

// Strongest tone inside [f_lo, f_hi]: Hann periodogram peak, three-point
// quadratic interpolation of log power, then a few local refinement passes
// of the continuous windowed periodogram (needed for ppm-level pilot
// spacing measurements).
TonePeak estimate_tone(const ComplexSeries& x, double f_lo, double f_hi);

/// Reusable tone search over one record: the windowed periodogram is
/// computed once, band queries share it.
class ToneSearch {
public:
    explicit ToneSearch(const ComplexSeries& x);
    TonePeak find(double f_lo, double f_hi) const;  // throws band_empty

private:
    const ComplexSeries& x_;
    std::vector<double> window_;
    double window_sum_ = 0.0;
    std::vector<double> power_;  // |FFT|^2 of the windowed record
};

struct DelayPeak {
    std::ptrdiff_t lag = 0;
    double metric = 0.0;  // normalized |cross-correlation| in [0, 1]
};

// Lag of the template inside x maximizing the magnitude of the normalized
// cross-correlation. Thresholding is the caller's business.
DelayPeak correlate_delay(std::span<const cplx> x, std::span<const cplx> tmpl);

// -- shaping / filtering helpers shared by transmitter and receiver --

// Upsample symbols onto the sps grid and pulse shape. Output length is
// n*sps + span*sps: half a filter span of lead-in and tail so edge symbols
// keep their full pulse energy. Symbol m is centered at span*sps/2 + m*sps.
cvec shape_symbols(std::span<const cplx> symbols, const RrcFilter& rrc);

// Centered FIR filtering via FFT overlap (output length = input length).
cvec filter_same(const cvec& x, const std::vector<double>& taps);

// Matched filter evaluated only on the decimation grid
// {start + m*sps : m < count}. Throws insufficient_samples if the grid
// (plus filter support) leaves the record.
cvec matched_filter_decimate(const cvec& x, const RrcFilter& rrc,
                             std::ptrdiff_t start, std::size_t count);

// FFT band mask: zero everything outside [f_center-halfwidth, f_center+halfwidth]
// and transform back.
ComplexSeries bandpass_fft(const ComplexSeries& x, double f_center, double halfwidth);

double mean_power(std::span<const cplx> x);

}  // namespace cvqkd
