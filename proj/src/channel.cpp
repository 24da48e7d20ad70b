#include "cvqkd/channel.hpp"

#include <cmath>
#include <numbers>

#include "cvqkd/dsp.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
enum StreamTag : std::uint64_t { kPhaseStream = 1, kNoiseStream = 2, kCalElec = 3, kCalShot = 4 };
}  // namespace

void ChannelConfig::validate() const {
    if (!(transmittance > 0.0) || transmittance > 1.0)
        throw invalid_config("channel: transmittance outside (0, 1]");
    if (!(efficiency > 0.0) || efficiency > 1.0)
        throw invalid_config("channel: efficiency outside (0, 1]");
    if (linewidth_sum < 0.0) throw invalid_config("channel: negative linewidth");
    if (electronic_noise < 0.0) throw invalid_config("channel: negative electronic noise");
    if (excess_noise_pnu < 0.0) throw invalid_config("channel: negative excess noise");
    if (skew < 0.999 || skew > 1.001) throw invalid_config("channel: skew outside [0.999, 1.001]");
    if (delay < 0.0) throw invalid_config("channel: negative delay");
    if (!(adc_rate > 0.0)) throw invalid_config("channel: adc_rate <= 0");
    if (!(adc_gain > 0.0)) throw invalid_config("channel: adc_gain <= 0");
}

std::vector<double> wiener_phase(std::size_t n, double linewidth, double rate,
                                 std::uint64_t seed) {
    if (n < 1) throw invalid_parameter("wiener_phase: n < 1");
    if (linewidth < 0.0) throw invalid_parameter("wiener_phase: negative linewidth");
    std::vector<double> phase(n);
    GaussianSampler g(seed);
    double p = kTwoPi * g.uniform01();  // random start phase
    if (linewidth == 0.0) {
        std::fill(phase.begin(), phase.end(), p);
        return phase;
    }
    const double step = std::sqrt(kTwoPi * linewidth / rate);
    for (std::size_t i = 0; i < n; ++i) {
        phase[i] = p;
        p += step * g();
    }
    return phase;
}

ComplexSeries apply_channel(const ComplexSeries& x, const ChannelConfig& cfg,
                            ChannelTruth* truth) {
    cfg.validate();
    const std::size_t delay_samples =
        static_cast<std::size_t>(std::llround(cfg.delay * cfg.adc_rate));

    // the acquisition keeps sampling a little past the frame, so downstream
    // filters never run off the record when the delay is small
    constexpr std::size_t kTailSamples = 2048;
    ComplexSeries y;
    y.sample_rate = cfg.adc_rate;
    y.samples.assign(delay_samples + x.size() + kTailSamples, cplx(0.0, 0.0));

    const double amp = std::sqrt(cfg.tau());
    std::vector<double> phase =
        wiener_phase(y.size(), cfg.linewidth_sum, cfg.adc_rate,
                     derive_seed(cfg.seed, kPhaseStream));
    const double w = kTwoPi * cfg.lo_offset / cfg.adc_rate;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const std::size_t m = delay_samples + n;
        const double ph = w * static_cast<double>(m) + phase[m];
        y.samples[m] = amp * x.samples[n] * cplx(std::cos(ph), std::sin(ph));
    }
    if (truth) {
        truth->delay_samples = delay_samples;
        truth->phase.resize(y.size());
        for (std::size_t m = 0; m < y.size(); ++m)
            truth->phase[m] = w * static_cast<double>(m) + phase[m];
    }

    if (cfg.skew != 1.0) {
        y = resample(y, cfg.skew);
        // the record is what the receiver believes it sampled at its nominal
        // clock; the true rate offset is exactly what the DSP must recover
        y.sample_rate = cfg.adc_rate;
    }

    if (cfg.noise_enabled) {
        // detection noise floor plus injected channel excess; normalized so a
        // matched-filtered symbol sees the same per-quadrature variance
        const double var_q = 1.0 + cfg.electronic_noise + cfg.tau() * cfg.excess_noise_pnu;
        const double sd = std::sqrt(var_q);
        GaussianSampler g(derive_seed(cfg.seed, kNoiseStream));
        for (auto& v : y.samples) v += sd * g.complex_unit();
    }
    if (cfg.adc_gain != 1.0)
        for (auto& v : y.samples) v *= cfg.adc_gain;
    return y;
}

void CalibrationRecord::validate() const {
    if (!(shot_plus_electronic_variance > electronic_variance))
        throw invalid_calibration("calibration: vacuum power not above electronic noise");
    if (!(snu() > 0.0)) throw invalid_calibration("calibration: non-positive shot-noise unit");
}

CalibrationRecord run_calibration(const ChannelConfig& cfg, const FrameLayout& layout,
                                  double nbar, std::uint64_t seed, int b2b_frames,
                                  std::size_t noise_samples) {
    CalibrationRecord cal;
    const double g2 = cfg.adc_gain * cfg.adc_gain;

    if (!cfg.noise_enabled) {
        // noise-free test mode: exact synthetic record
        cal.electronic_variance = cfg.electronic_noise * g2;
        cal.shot_plus_electronic_variance = (1.0 + cfg.electronic_noise) * g2;
    } else {
        // (a) lasers off -> electronic only; (b) LO on -> vacuum + electronic
        GaussianSampler ge(derive_seed(seed, kCalElec));
        double acc = 0.0;
        const double sd_e = std::sqrt(cfg.electronic_noise);
        for (std::size_t i = 0; i < noise_samples; ++i) acc += std::norm(sd_e * ge.complex_unit());
        cal.electronic_variance = 0.5 * acc / static_cast<double>(noise_samples) * g2;

        GaussianSampler gs(derive_seed(seed, kCalShot));
        acc = 0.0;
        const double sd_s = std::sqrt(1.0 + cfg.electronic_noise);
        for (std::size_t i = 0; i < noise_samples; ++i) acc += std::norm(sd_s * gs.complex_unit());
        cal.shot_plus_electronic_variance = 0.5 * acc / static_cast<double>(noise_samples) * g2;
    }
    cal.validate();

    // (c) back-to-back frames: direct connection, shared clock, no LO beat.
    // Correlating Bob's matched-filter output against the known symbols gives
    // the modulation variance in shot-noise units.
    ChannelConfig b2b = cfg;
    b2b.delay = 0.0;
    b2b.skew = 1.0;
    b2b.lo_offset = 0.0;
    b2b.linewidth_sum = 0.0;
    b2b.transmittance = 1.0;
    b2b.excess_noise_pnu = 0.0;

    const RrcFilter rrc = design_rrc(layout.rolloff, layout.rrc_span, layout.sps());
    const std::size_t n = layout.n_quantum;
    double num = 0.0, den = 0.0;
    const double snu_scale = std::sqrt(cal.snu());
    for (int fr = 0; fr < b2b_frames; ++fr) {
        b2b.seed = derive_seed(seed, 0xb2b, fr);
        QuantumSymbols a = draw_gaussian_symbols(n, nbar, derive_seed(seed, 0xa11ce, fr));
        CazacSequence caz = generate_cazac(layout.n_reference, 7);
        QpskFrame qp = make_qpsk_frame(layout, 0, derive_seed(seed, 0x9b5e, fr));
        ComplexSeries wave = build_frame(layout, a, caz, qp, derive_seed(seed, 0xf2a, fr));
        ComplexSeries rec = apply_channel(wave, b2b);
        // known timing: quantum symbols start after the references
        ComplexSeries bb = frequency_shift({rec.samples, rec.sample_rate}, -layout.f_quantum);
        const std::ptrdiff_t start = rrc.center() + static_cast<std::ptrdiff_t>(layout.n_reference) * layout.sps();
        cvec b = matched_filter_decimate(bb.samples, rrc, start, n);
        for (std::size_t i = 0; i < n; ++i) {
            num += (std::conj(a.values[i]) * (b[i] / snu_scale)).real();
            den += std::norm(a.values[i]);
        }
    }
    const double gain = num / den;  // estimates sqrt(eta/2)
    cal.modulation_variance = 2.0 * gain * gain * (den / (static_cast<double>(n) * b2b_frames)) / cfg.efficiency;
    return cal;
}

}  // namespace cvqkd
