#include "cvqkd/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cvqkd/fft.hpp"

namespace cvqkd {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

RrcFilter design_rrc(double rolloff, int span_symbols, int samples_per_symbol) {
    if (!(rolloff > 0.0) || rolloff > 1.0)
        throw invalid_parameter("design_rrc: rolloff must be in (0, 1]");
    if (span_symbols < 4) throw invalid_parameter("design_rrc: span < 4 symbols");
    if (samples_per_symbol < 2) throw invalid_parameter("design_rrc: sps < 2");

    RrcFilter f;
    f.rolloff = rolloff;
    f.span = span_symbols;
    f.samples_per_symbol = samples_per_symbol;
    const int n = span_symbols * samples_per_symbol + 1;
    const int c = span_symbols * samples_per_symbol / 2;
    f.taps.resize(n);
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i - c) / samples_per_symbol;
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 - rolloff + 4.0 * rolloff / kPi;
        } else if (std::abs(std::abs(4.0 * rolloff * t) - 1.0) < 1e-9) {
            const double a = kPi / (4.0 * rolloff);
            v = (rolloff / std::sqrt(2.0)) *
                ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
        } else {
            const double num =
                std::sin(kPi * t * (1.0 - rolloff)) + 4.0 * rolloff * t * std::cos(kPi * t * (1.0 + rolloff));
            const double den = kPi * t * (1.0 - 16.0 * rolloff * rolloff * t * t);
            v = num / den;
        }
        f.taps[i] = v;
    }
    // enforce exact symmetry, then unit energy
    for (int i = 0; i < n / 2; ++i) {
        const double avg = 0.5 * (f.taps[i] + f.taps[n - 1 - i]);
        f.taps[i] = f.taps[n - 1 - i] = avg;
    }
    const double energy = std::inner_product(f.taps.begin(), f.taps.end(), f.taps.begin(), 0.0);
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : f.taps) v *= scale;
    return f;
}

ComplexSeries frequency_shift(const ComplexSeries& x, double f_hz) {
    if (!(x.sample_rate > 0.0)) throw invalid_parameter("frequency_shift: bad sample rate");
    if (std::abs(f_hz) >= x.nyquist())
        throw invalid_parameter("frequency_shift: |f| beyond Nyquist");
    ComplexSeries y;
    y.sample_rate = x.sample_rate;
    y.samples.resize(x.size());
    if (f_hz == 0.0) {
        y.samples = x.samples;
        return y;
    }
    // rotation recurrence, re-anchored to the exact phase every block so
    // rounding never accumulates
    const double w = kTwoPi * f_hz / x.sample_rate;
    const cplx step(std::cos(w), std::sin(w));
    constexpr std::size_t block = 4096;
    cplx rot(1.0, 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        if (n % block == 0) rot = cplx(std::cos(w * n), std::sin(w * n));
        y.samples[n] = x.samples[n] * rot;
        rot *= step;
    }
    return y;
}

namespace {

double bessel_i0(double x) {
    // series expansion, converges quickly for the beta range used here
    double sum = 1.0, term = 1.0;
    const double q = 0.25 * x * x;
    for (int k = 1; k < 64; ++k) {
        term *= q / (k * k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

// Windowed-sinc interpolation kernel table (Kaiser beta = 8). 64 taps keep
// the passband flat out to ~0.46 of the sample rate, which the up-shifted
// quantum band needs; the transition region beyond carries no signal when
// the ratio is near one.
struct InterpTable {
    static constexpr int kTaps = 64;
    static constexpr int kHalf = kTaps / 2;  // 32
    static constexpr int kPhases = 4096;
    std::vector<double> rows;  // (kPhases+1) x kTaps, row-normalized to unit sum

    explicit InterpTable(double cutoff) {
        const double beta = 8.0;
        const double i0b = bessel_i0(beta);
        rows.resize(static_cast<std::size_t>(kPhases + 1) * kTaps);
        for (int p = 0; p <= kPhases; ++p) {
            const double mu = static_cast<double>(p) / kPhases;
            double* row = &rows[static_cast<std::size_t>(p) * kTaps];
            double sum = 0.0;
            for (int k = 0; k < kTaps; ++k) {
                const double u = (k - (kHalf - 1)) - mu;  // distance from the sample point
                double s;
                if (std::abs(u) < 1e-12) {
                    s = 2.0 * cutoff;
                } else {
                    s = std::sin(kTwoPi * cutoff * u) / (kPi * u);
                }
                const double w = u / kHalf;  // in (-1, 1) over the support
                const double win = (std::abs(w) < 1.0) ? bessel_i0(beta * std::sqrt(1.0 - w * w)) / i0b : 0.0;
                row[k] = s * win;
                sum += row[k];
            }
            for (int k = 0; k < kTaps; ++k) row[k] /= sum;
        }
    }
};

}  // namespace

ComplexSeries resample(const ComplexSeries& x, double ratio) {
    if (!(ratio >= 0.5 && ratio <= 2.0))
        throw invalid_parameter("resample: ratio outside [0.5, 2.0]");
    if (x.size() == 0) throw invalid_parameter("resample: empty input");

    ComplexSeries y;
    y.sample_rate = x.sample_rate * ratio;
    const std::size_t n_out = static_cast<std::size_t>(std::floor(static_cast<double>(x.size()) * ratio));
    y.samples.resize(n_out);
    if (ratio == 1.0) {
        y.samples = x.samples;
        return y;
    }

    // half-band cutoff keeps integer grid points exact; when decimating the
    // cutoff shrinks to the output Nyquist
    const double cutoff = 0.5 * std::min(1.0, ratio);
    InterpTable table(cutoff);
    const auto& xs = x.samples;
    const std::ptrdiff_t n_in = static_cast<std::ptrdiff_t>(xs.size());

    for (std::size_t m = 0; m < n_out; ++m) {
        const double t = static_cast<double>(m) / ratio;
        const std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(std::floor(t));
        const double mu = t - static_cast<double>(i0);
        const double pf = mu * InterpTable::kPhases;
        const int p = static_cast<int>(pf);
        const double frac = pf - p;
        const double* r0 = &table.rows[static_cast<std::size_t>(p) * InterpTable::kTaps];
        const double* r1 = r0 + InterpTable::kTaps;
        cplx acc(0.0, 0.0);
        const std::ptrdiff_t base = i0 - (InterpTable::kHalf - 1);
        if (base >= 0 && base + InterpTable::kTaps <= n_in) {
            for (int k = 0; k < InterpTable::kTaps; ++k) {
                const double c = r0[k] + frac * (r1[k] - r0[k]);
                acc += c * xs[base + k];
            }
        } else {
            for (int k = 0; k < InterpTable::kTaps; ++k) {
                const std::ptrdiff_t idx = base + k;
                if (idx < 0 || idx >= n_in) continue;
                const double c = r0[k] + frac * (r1[k] - r0[k]);
                acc += c * xs[idx];
            }
        }
        y.samples[m] = acc;
    }
    return y;
}

namespace {

// |windowed DFT|^2 at an arbitrary frequency, normalized so a clean
// unit-amplitude tone peaks at ~1
double windowed_power_at(const cvec& x, const std::vector<double>& win, double win_sum,
                         double f, double rate) {
    const double w = kTwoPi * f / rate;
    const cplx step(std::cos(-w), std::sin(-w));
    constexpr std::size_t block = 4096;
    cplx rot(1.0, 0.0);
    cplx acc(0.0, 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        if (n % block == 0) rot = cplx(std::cos(-w * n), std::sin(-w * n));
        acc += win[n] * x[n] * rot;
        rot *= step;
    }
    const double mag = std::abs(acc) / win_sum;
    return mag * mag;
}

}  // namespace

ToneSearch::ToneSearch(const ComplexSeries& x) : x_(x) {
    if (x.size() < 1024) throw invalid_parameter("estimate_tone: need >= 1024 samples");
    const std::size_t n = x.size();
    window_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        window_[i] = 0.5 * (1.0 - std::cos(kTwoPi * i / (n - 1)));
        window_sum_ += window_[i];
    }
    cvec xw(n);
    for (std::size_t i = 0; i < n; ++i) xw[i] = x.samples[i] * window_[i];
    cvec spec = fft::forward(xw);
    power_.resize(n);
    for (std::size_t i = 0; i < n; ++i) power_[i] = std::norm(spec[i]);
}

TonePeak ToneSearch::find(double f_lo, double f_hi) const {
    if (!(f_lo < f_hi)) throw invalid_parameter("estimate_tone: empty band");
    const double nyq = x_.nyquist();
    if (f_lo <= -nyq || f_hi >= nyq)
        throw invalid_parameter("estimate_tone: band outside (-Nyquist, Nyquist)");

    const std::size_t n = x_.size();
    const double df = x_.sample_rate / static_cast<double>(n);
    const auto bin_freq = [&](std::size_t k) {
        return (k <= n / 2) ? df * static_cast<double>(k)
                            : df * (static_cast<double>(k) - static_cast<double>(n));
    };

    double best = -1.0;
    std::size_t best_k = 0;
    bool found = false;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = bin_freq(k);
        if (f < f_lo || f > f_hi) continue;
        if (power_[k] > best) {
            best = power_[k];
            best_k = k;
            found = true;
        }
    }
    if (!found) throw band_empty("estimate_tone: no FFT bin inside band");

    // three-point quadratic interpolation of log power around the peak bin
    double delta = 0.0;
    const double pm = power_[(best_k + n - 1) % n];
    const double pp = power_[(best_k + 1) % n];
    if (pm > 0.0 && pp > 0.0 && best > 0.0) {
        const double lm = std::log(pm), l0 = std::log(best), lp = std::log(pp);
        const double den = lm - 2.0 * l0 + lp;
        if (den < 0.0) delta = 0.5 * (lm - lp) / den;
        delta = std::clamp(delta, -0.5, 0.5);
    }
    double f_hat = bin_freq(best_k) + delta * df;

    // local refinement of the continuous windowed periodogram; pulls the
    // estimate from bin-level to (noise-limited) sub-Hz accuracy
    double d = 0.3 * df;
    double p0 = windowed_power_at(x_.samples, window_, window_sum_, f_hat, x_.sample_rate);
    for (int it = 0; it < 4; ++it) {
        const double pl = windowed_power_at(x_.samples, window_, window_sum_, f_hat - d, x_.sample_rate);
        const double pr = windowed_power_at(x_.samples, window_, window_sum_, f_hat + d, x_.sample_rate);
        const double den = pl - 2.0 * p0 + pr;
        if (den < 0.0) {
            double step = 0.5 * d * (pl - pr) / den;
            step = std::clamp(step, -d, d);
            const double f_new = f_hat + step;
            const double p_new = windowed_power_at(x_.samples, window_, window_sum_, f_new, x_.sample_rate);
            if (p_new >= p0) {
                f_hat = f_new;
                p0 = p_new;
            }
        } else if (pl > p0 || pr > p0) {
            if (pl > pr && pl > p0) { f_hat -= d; p0 = pl; }
            else if (pr > p0)       { f_hat += d; p0 = pr; }
        }
        d *= 0.15;
    }
    f_hat = std::clamp(f_hat, f_lo, f_hi);

    TonePeak out;
    out.frequency = f_hat;
    // Hann coherent gain is already divided out through window_sum_
    out.power = p0;
    return out;
}

TonePeak estimate_tone(const ComplexSeries& x, double f_lo, double f_hi) {
    return ToneSearch(x).find(f_lo, f_hi);
}

DelayPeak correlate_delay(std::span<const cplx> x, std::span<const cplx> tmpl) {
    if (tmpl.size() < 64) throw invalid_parameter("correlate_delay: template < 64 symbols");
    if (x.size() < tmpl.size()) throw invalid_parameter("correlate_delay: x shorter than template");

    const std::size_t nx = x.size(), nt = tmpl.size();
    const std::size_t nlag = nx - nt + 1;
    const std::size_t nfft = fft::next_fast_size(nx + nt);

    cvec fx(nfft, cplx(0.0, 0.0)), ft(nfft, cplx(0.0, 0.0));
    std::copy(x.begin(), x.end(), fx.begin());
    std::copy(tmpl.begin(), tmpl.end(), ft.begin());
    cvec Fx = fft::forward(fx);
    cvec Ft = fft::forward(ft);
    for (std::size_t i = 0; i < nfft; ++i) Fx[i] *= std::conj(Ft[i]);
    cvec corr = fft::inverse(Fx);  // corr[l] = sum_k conj(t[k]) x[l+k]

    double t_energy = 0.0;
    for (const auto& v : tmpl) t_energy += std::norm(v);
    std::vector<double> prefix(nx + 1, 0.0);
    for (std::size_t i = 0; i < nx; ++i) prefix[i + 1] = prefix[i] + std::norm(x[i]);

    DelayPeak best;
    best.metric = -1.0;
    for (std::size_t l = 0; l < nlag; ++l) {
        const double w_energy = prefix[l + nt] - prefix[l];
        if (w_energy <= 0.0) continue;
        const double m = std::abs(corr[l]) / std::sqrt(t_energy * w_energy);
        if (m > best.metric) {
            best.metric = m;
            best.lag = static_cast<std::ptrdiff_t>(l);
        }
    }
    if (best.metric < 0.0) best.metric = 0.0;
    best.metric = std::min(best.metric, 1.0);
    return best;
}

cvec shape_symbols(std::span<const cplx> symbols, const RrcFilter& rrc) {
    const int sps = rrc.samples_per_symbol;
    const std::size_t pad = static_cast<std::size_t>(rrc.span) * sps;
    cvec out(symbols.size() * sps + pad, cplx(0.0, 0.0));
    const std::size_t ntaps = rrc.taps.size();
    for (std::size_t m = 0; m < symbols.size(); ++m) {
        const cplx a = symbols[m];
        if (a == cplx(0.0, 0.0)) continue;
        double* dst = reinterpret_cast<double*>(&out[m * sps]);
        const double re = a.real(), im = a.imag();
        for (std::size_t k = 0; k < ntaps; ++k) {
            dst[2 * k] += re * rrc.taps[k];
            dst[2 * k + 1] += im * rrc.taps[k];
        }
    }
    return out;
}

cvec filter_same(const cvec& x, const std::vector<double>& taps) {
    const std::size_t n = x.size(), nt = taps.size();
    const std::size_t c = nt / 2;
    const std::size_t nfft = fft::next_fast_size(n + nt);
    cvec fx(nfft, cplx(0.0, 0.0)), fh(nfft, cplx(0.0, 0.0));
    std::copy(x.begin(), x.end(), fx.begin());
    for (std::size_t i = 0; i < nt; ++i) fh[i] = cplx(taps[i], 0.0);
    cvec Fx = fft::forward(fx);
    cvec Fh = fft::forward(fh);
    for (std::size_t i = 0; i < nfft; ++i) Fx[i] *= Fh[i];
    cvec full = fft::inverse(Fx);
    cvec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = full[i + c];
    return out;
}

cvec matched_filter_decimate(const cvec& x, const RrcFilter& rrc,
                             std::ptrdiff_t start, std::size_t count) {
    const std::ptrdiff_t c = rrc.center();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t sps = rrc.samples_per_symbol;
    const std::ptrdiff_t ntaps = static_cast<std::ptrdiff_t>(rrc.taps.size());
    // every symbol center must lie inside the record; tap support that pokes
    // past the edges reads zeros
    if (start < 0 || start + static_cast<std::ptrdiff_t>(count - 1) * sps >= n)
        throw insufficient_samples("matched_filter_decimate: grid leaves the record");
    cvec out(count);
    for (std::size_t m = 0; m < count; ++m) {
        const std::ptrdiff_t base = start + static_cast<std::ptrdiff_t>(m) * sps - c;
        cplx acc(0.0, 0.0);
        if (base >= 0 && base + ntaps <= n) {
            const cplx* src = &x[base];
            for (std::ptrdiff_t k = 0; k < ntaps; ++k) acc += rrc.taps[k] * src[k];
        } else {
            for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, -base);
                 k < ntaps && base + k < n; ++k)
                acc += rrc.taps[k] * x[base + k];
        }
        out[m] = acc;
    }
    return out;
}

ComplexSeries bandpass_fft(const ComplexSeries& x, double f_center, double halfwidth) {
    if (!(halfwidth > 0.0)) throw invalid_parameter("bandpass_fft: halfwidth <= 0");
    const std::size_t n = x.size();
    cvec spec = fft::forward(x.samples);
    const double df = x.sample_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = (k <= n / 2) ? df * static_cast<double>(k)
                                      : df * (static_cast<double>(k) - static_cast<double>(n));
        if (std::abs(f - f_center) > halfwidth) spec[k] = cplx(0.0, 0.0);
    }
    ComplexSeries y;
    y.sample_rate = x.sample_rate;
    y.samples = fft::inverse(spec);
    return y;
}

double mean_power(std::span<const cplx> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (const auto& v : x) s += std::norm(v);
    return s / static_cast<double>(x.size());
}

}  // namespace cvqkd
