#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cvqkd/dsp.hpp"
#include "cvqkd/fft.hpp"
#include "cvqkd/rng.hpp"

using namespace cvqkd;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

ComplexSeries make_tone(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
    ComplexSeries x;
    x.sample_rate = fs;
    x.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ph = kTwoPi * f * static_cast<double>(i) / fs + phase;
        x.samples[i] = amp * cplx(std::cos(ph), std::sin(ph));
    }
    return x;
}

// Independent evaluation of the textbook root-raised-cosine impulse
// response, written separately from the library path.
std::vector<double> rrc_oracle(double a, int span, int sps) {
    const int n = span * sps + 1;
    const int c = span * sps / 2;
    std::vector<double> h(n);
    for (int i = 0; i < n; ++i) {
        const long double t = static_cast<long double>(i - c) / sps;
        long double v;
        if (t == 0.0L) {
            v = 1.0L - a + 4.0L * a / kPi;
        } else if (std::abs(std::abs(4.0L * a * t) - 1.0L) < 1e-9L) {
            const long double q = kPi / (4.0L * a);
            v = (a / std::sqrt(2.0L)) *
                ((1.0L + 2.0L / kPi) * std::sin(q) + (1.0L - 2.0L / kPi) * std::cos(q));
        } else {
            v = (std::sin(kPi * t * (1.0L - a)) + 4.0L * a * t * std::cos(kPi * t * (1.0L + a))) /
                (kPi * t * (1.0L - 16.0L * a * a * t * t));
        }
        h[i] = static_cast<double>(v);
    }
    long double e = 0.0L;
    for (double v : h) e += static_cast<long double>(v) * v;
    const double s = static_cast<double>(1.0L / std::sqrt(e));
    for (auto& v : h) v *= s;
    return h;
}

// Brute-force fine-grid windowed periodogram peak (tone-location oracle).
double tone_oracle(const ComplexSeries& x, double f_lo, double f_hi, double step) {
    const std::size_t n = x.size();
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(kTwoPi * i / (n - 1)));
    double best_p = -1.0, best_f = f_lo;
    for (double f = f_lo; f <= f_hi; f += step) {
        cplx acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ph = -kTwoPi * f * static_cast<double>(i) / x.sample_rate;
            acc += w[i] * x.samples[i] * cplx(std::cos(ph), std::sin(ph));
        }
        const double p = std::norm(acc);
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    return best_f;
}

}  // namespace

TEST_CASE("design_rrc matches the closed form and is symmetric, unit energy") {
    const RrcFilter f = design_rrc(0.2, 20, 50);
    REQUIRE(f.taps.size() == 1001);

    for (std::size_t k = 0; k < f.taps.size(); ++k)
        CHECK(f.taps[k] == f.taps[f.taps.size() - 1 - k]);  // exact symmetry

    double energy = 0.0;
    for (double v : f.taps) energy += v * v;
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-12));

    const auto oracle = rrc_oracle(0.2, 20, 50);
    for (std::size_t k = 0; k < f.taps.size(); ++k)
        CHECK(std::abs(f.taps[k] - oracle[k]) < 1e-12);
    // center tap carries the analytic t = 0 limit (post-normalization)
    CHECK(f.taps[500] == doctest::Approx(oracle[500]).epsilon(1e-14));
}

TEST_CASE("design_rrc rejects out-of-range parameters") {
    CHECK_THROWS_AS(design_rrc(0.0, 20, 50), invalid_parameter);
    CHECK_THROWS_AS(design_rrc(-0.1, 20, 50), invalid_parameter);
    CHECK_THROWS_AS(design_rrc(1.2, 20, 50), invalid_parameter);
    CHECK_THROWS_AS(design_rrc(0.2, 3, 50), invalid_parameter);
    CHECK_THROWS_AS(design_rrc(0.2, 20, 1), invalid_parameter);
}

TEST_CASE("rrc cascade forms a raised cosine with low intersymbol interference") {
    for (int span : {20, 30}) {
        const RrcFilter f = design_rrc(0.2, span, 50);
        std::vector<double> rc(2 * f.taps.size() - 1, 0.0);
        for (std::size_t i = 0; i < f.taps.size(); ++i)
            for (std::size_t j = 0; j < f.taps.size(); ++j) rc[i + j] += f.taps[i] * f.taps[j];
        const std::size_t center = f.taps.size() - 1;
        double worst = 0.0;
        for (int k = 1; k < span; ++k)
            worst = std::max(worst, std::abs(rc[center + 50 * k]));
        worst /= rc[center];
        CHECK(worst < 1e-2);  // -40 dB requirement; actual is far lower
        if (span == 30) CHECK(worst < 1e-3);
    }
}

TEST_CASE("frequency_shift identity, construction and inverse") {
    ComplexSeries x = make_tone(25e6, 1e9, 8192, 0.7, 0.3);

    SUBCASE("zero shift returns the input") {
        ComplexSeries y = frequency_shift(x, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.samples[i] == x.samples[i]);
    }
    SUBCASE("25 MHz tone shifted by +95 MHz peaks at 120 MHz") {
        ComplexSeries big = make_tone(25e6, 1e9, 1 << 16);
        TonePeak p = estimate_tone(frequency_shift(big, 95e6), 60e6, 200e6);
        CHECK(p.frequency == doctest::Approx(120e6).epsilon(1e-9));
    }
    SUBCASE("shift by f then -f recovers the input to round-off") {
        ComplexSeries y = frequency_shift(frequency_shift(x, 37.5e6), -37.5e6);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, std::abs(y.samples[i] - x.samples[i]));
        CHECK(worst < 1e-12);
    }
    SUBCASE("total power preserved to 1e-12 relative") {
        ComplexSeries y = frequency_shift(x, 123.4567e6);
        CHECK(mean_power(y.samples) ==
              doctest::Approx(mean_power(x.samples)).epsilon(1e-12));
    }
    SUBCASE("beyond Nyquist rejected") {
        CHECK_THROWS_AS(frequency_shift(x, 0.5e9), invalid_parameter);
        CHECK_THROWS_AS(frequency_shift(x, -0.6e9), invalid_parameter);
    }
}

TEST_CASE("resample identity, length contract and range check") {
    ComplexSeries x = make_tone(25e6, 1e9, 4096);
    ComplexSeries same = resample(x, 1.0);
    CHECK(same.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(same.samples[i] == x.samples[i]);

    ComplexSeries dbl = resample(x, 2.0);
    CHECK(dbl.size() == 2 * x.size());
    CHECK(dbl.sample_rate == doctest::Approx(2e9));

    CHECK_THROWS_AS(resample(x, 0.49), invalid_parameter);
    CHECK_THROWS_AS(resample(x, 2.01), invalid_parameter);
}

TEST_CASE("resample of a tone matches the analytically skewed tone") {
    const double fs = 1e9, f = 25e6, ratio = 1.0 + 2e-5;
    ComplexSeries x = make_tone(f, fs, 200000, 1.0, 0.2);
    ComplexSeries y = resample(x, ratio);

    // the resampled grid reads the tone at input times m / ratio
    double err = 0.0, ref = 0.0;
    const std::size_t guard = 64;
    for (std::size_t m = guard; m + guard < y.size(); ++m) {
        const double t = static_cast<double>(m) / ratio;
        const cplx truth = std::polar(1.0, kTwoPi * f * t / fs + 0.2);
        err += std::norm(y.samples[m] - truth);
        ref += std::norm(truth);
    }
    CHECK(err / ref < 1e-6);

    // reinterpreted on the nominal clock the tone lands at f / ratio
    ComplexSeries nominal{y.samples, fs};
    TonePeak p = estimate_tone(nominal, 20e6, 30e6);
    CHECK(p.frequency == doctest::Approx(f / ratio).epsilon(1e-9));
}

TEST_CASE("resample round trip on band-limited input") {
    // band-limited noise: shaped random symbols, band well inside Nyquist
    const RrcFilter shape = design_rrc(0.3, 12, 8);
    GaussianSampler g(17);
    cvec syms(3000);
    for (auto& v : syms) v = g.complex_unit();
    cvec wave = shape_symbols(syms, shape);
    ComplexSeries x{std::move(wave), 1.0};

    for (double r : {0.9, 1.1}) {
        ComplexSeries y = resample(resample(x, r), 1.0 / r);
        const std::size_t guard = 128;
        double err = 0.0, ref = 0.0;
        for (std::size_t i = guard; i + guard < std::min(x.size(), y.size()); ++i) {
            err += std::norm(y.samples[i] - x.samples[i]);
            ref += std::norm(x.samples[i]);
        }
        CAPTURE(r);
        CHECK(err / ref < 1e-6);
    }
}

TEST_CASE("estimate_tone hits on-bin tones exactly and refines off-grid tones") {
    const double fs = 1e9;
    const std::size_t n = 1 << 16;
    const double bin = fs / static_cast<double>(n);

    SUBCASE("tone on a bin") {
        const double f = 256 * bin;
        TonePeak p = estimate_tone(make_tone(f, fs, n), f - 5e6, f + 5e6);
        CHECK(std::abs(p.frequency - f) < 1e-3 * bin);
        CHECK(p.power == doctest::Approx(1.0).epsilon(1e-3));
    }
    SUBCASE("off-grid tones against the fine-grid oracle") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> frac(-0.49, 0.49);
        for (int trial = 0; trial < 6; ++trial) {
            const double f = (2000 + 37 * trial) * bin + frac(rng) * bin;
            ComplexSeries x = make_tone(f, fs, n, 1.0, 0.77);
            TonePeak p = estimate_tone(x, f - 4 * bin, f + 4 * bin);
            const double oracle =
                tone_oracle(x, p.frequency - 0.2 * bin, p.frequency + 0.2 * bin, 0.002 * bin);
            CAPTURE(f);
            CHECK(std::abs(p.frequency - f) < 0.1 * bin);
            CHECK(std::abs(p.frequency - oracle) < 0.005 * bin);
        }
    }
    SUBCASE("midway tone on a 500k-sample record") {
        const std::size_t big = 500000;
        const double bbin = fs / static_cast<double>(big);
        const double f = 120e6 + 0.5 * bbin;
        TonePeak p = estimate_tone(make_tone(f, fs, big), 119e6, 121e6);
        CHECK(std::abs(p.frequency - f) < 0.1 * bbin);
    }
    SUBCASE("invariant under a unit-magnitude constant") {
        const double f = 1234 * bin + 0.3 * bin;
        ComplexSeries x = make_tone(f, fs, n);
        ComplexSeries y = x;
        const cplx u = std::polar(1.0, 1.234);
        for (auto& v : y.samples) v *= u;
        TonePeak a = estimate_tone(x, f - 3 * bin, f + 3 * bin);
        TonePeak b = estimate_tone(y, f - 3 * bin, f + 3 * bin);
        CHECK(std::abs(a.frequency - b.frequency) < 1e-3 * bin);
    }
    SUBCASE("noise-only input returns a peak without error") {
        GaussianSampler g(5);
        ComplexSeries x;
        x.sample_rate = fs;
        x.samples.resize(4096);
        for (auto& v : x.samples) v = g.complex_unit();
        CHECK_NOTHROW(estimate_tone(x, 10e6, 400e6));
    }
    SUBCASE("empty band and short input rejected") {
        ComplexSeries x = make_tone(1e6, fs, 2048);
        const double df = fs / 2048.0;
        CHECK_THROWS_AS(estimate_tone(x, 1e6 + 0.2 * df, 1e6 + 0.3 * df), band_empty);
        ComplexSeries tiny = make_tone(1e6, fs, 512);
        CHECK_THROWS_AS(estimate_tone(tiny, 0.5e6, 2e6), invalid_parameter);
    }
}

TEST_CASE("correlate_delay finds embedded templates") {
    GaussianSampler g(21);
    cvec tmpl(256);
    for (auto& v : tmpl) v = g.complex_unit();

    SUBCASE("verbatim embedding in quiet surroundings") {
        cvec x(4096, cplx(1e-6, 0.0));
        for (std::size_t i = 0; i < tmpl.size(); ++i) x[1234 + i] = tmpl[i];
        DelayPeak p = correlate_delay(x, tmpl);
        CHECK(p.lag == 1234);
        CHECK(p.metric > 0.999);
    }
    SUBCASE("monte carlo at symbol error rate near 10 percent") {
        // QPSK SER 0.1 <-> per-symbol SNR ~ 2.7
        const double snr = 2.7;
        const double sd = std::sqrt(1.0 / (2.0 * snr));
        int hits = 0;
        double min_metric = 1.0;
        for (int seed = 0; seed < 100; ++seed) {
            GaussianSampler r(1000 + seed);
            cvec h(512);
            for (auto& v : h) v = std::polar(1.0, 0.5 * kPi * static_cast<double>(r.raw() & 3));
            cvec x(6000);
            for (auto& v : x) v = std::polar(1.0, 0.5 * kPi * static_cast<double>(r.raw() & 3)) +
                                  sd * r.complex_unit();
            const std::size_t off = 700 + (r.raw() % 3000);
            for (std::size_t i = 0; i < h.size(); ++i) x[off + i] = h[i] + sd * r.complex_unit();
            DelayPeak p = correlate_delay(x, h);
            if (p.lag == static_cast<std::ptrdiff_t>(off)) ++hits;
            min_metric = std::min(min_metric, p.metric);
        }
        CHECK(hits == 100);
        CHECK(min_metric > 0.5);
    }
    SUBCASE("absent template stays under the sync threshold") {
        double worst = 0.0;
        for (int seed = 0; seed < 1000; ++seed) {
            GaussianSampler r(5000 + seed);
            cvec h(2000), x(6000);
            for (auto& v : h) v = std::polar(1.0, 0.5 * kPi * static_cast<double>(r.raw() & 3));
            for (auto& v : x) v = r.complex_unit();
            worst = std::max(worst, correlate_delay(x, h).metric);
        }
        CHECK(worst < 0.4);  // the frame-sync threshold sits well above the noise floor
    }
    SUBCASE("lag invariant under global phase rotation") {
        GaussianSampler r(8);
        cvec x(4096);
        for (auto& v : x) v = r.complex_unit();
        for (std::size_t i = 0; i < tmpl.size(); ++i) x[321 + i] = 2.0 * tmpl[i];
        DelayPeak a = correlate_delay(x, tmpl);
        cvec y(x.size());
        const cplx u = std::polar(1.0, -2.1);
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * u;
        DelayPeak b = correlate_delay(y, tmpl);
        CHECK(a.lag == b.lag);
        CHECK(a.metric == doctest::Approx(b.metric).epsilon(1e-9));
    }
    SUBCASE("preconditions") {
        cvec small(32), x(4096);
        CHECK_THROWS_AS(correlate_delay(x, small), invalid_parameter);
        CHECK_THROWS_AS(correlate_delay(small, tmpl), invalid_parameter);
    }
}

TEST_CASE("fft helpers round trip") {
    GaussianSampler g(2);
    cvec x(1000);
    for (auto& v : x) v = g.complex_unit();
    cvec y = fft::inverse(fft::forward(x));
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
    CHECK(worst < 1e-12);
    CHECK(fft::next_fast_size(601501) >= 601501);
    CHECK(fft::next_fast_size(1) == 1);
    const std::size_t s = fft::next_fast_size(700001);
    std::size_t r = s;
    while (r % 2 == 0) r /= 2;
    while (r % 3 == 0) r /= 3;
    while (r % 5 == 0) r /= 5;
    CHECK(r == 1);
}
