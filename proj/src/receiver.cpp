#include "cvqkd/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace cvqkd {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double estimate_skew(double f1_rx, double f2_rx, double pilot_spacing_tx) {
    if (!(f1_rx > f2_rx)) throw invalid_parameter("estimate_skew: f1 <= f2");
    if (!(pilot_spacing_tx > 0.0)) throw invalid_parameter("estimate_skew: bad pilot spacing");
    return (f1_rx - f2_rx) / pilot_spacing_tx;
}

ComplexSeries compensate_phase(const ComplexSeries& x, std::span<const double> phases) {
    if (x.size() != phases.size()) throw length_mismatch("compensate_phase: length mismatch");
    ComplexSeries y;
    y.sample_rate = x.sample_rate;
    y.samples.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = std::cos(phases[i]), s = std::sin(phases[i]);
        y.samples[i] = x.samples[i] * cplx(c, -s);
    }
    return y;
}

int select_optimum_sample(std::span<const cplx> x, int sps) {
    if (sps < 1) throw invalid_parameter("select_optimum_sample: sps < 1");
    if (x.size() < static_cast<std::size_t>(10 * sps))
        throw invalid_parameter("select_optimum_sample: fewer than 10 symbols");
    int best_k = 0;
    double best_p = -1.0;
    for (int k = 0; k < sps; ++k) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t i = static_cast<std::size_t>(k); i < x.size(); i += sps) {
            acc += std::norm(x[i]);
            ++count;
        }
        const double p = acc / static_cast<double>(count);
        if (p > best_p) {
            best_p = p;
            best_k = k;
        }
    }
    return best_k;
}

std::vector<double> mth_power_phase(std::span<const cplx> symbols, int m_power, int n_window,
                                    bool lenient) {
    if (m_power < 2) throw invalid_parameter("mth_power_phase: M < 2");
    if (n_window < 8) throw invalid_parameter("mth_power_phase: window < 8 symbols");
    const std::size_t windows = symbols.size() / static_cast<std::size_t>(n_window);
    if (windows < 1) throw invalid_parameter("mth_power_phase: fewer symbols than one window");

    const double sector = kTwoPi / m_power;
    std::vector<double> theta(windows);
    double prev = 0.0;
    bool have_prev = false;
    std::size_t good = 0;
    for (std::size_t w = 0; w < windows; ++w) {
        cplx acc(0.0, 0.0);
        const cplx* p = symbols.data() + w * n_window;
        for (int i = 0; i < n_window; ++i) {
            cplx v = p[i];
            cplx pw = v;
            for (int k = 1; k < m_power; ++k) pw *= v;
            acc += pw;
        }
        if (std::abs(acc) < 1e-12) {
            if (!lenient) throw degenerate_window("mth_power_phase: vanishing window sum");
            theta[w] = have_prev ? prev : 0.0;
            continue;
        }
        double th = std::atan2(acc.imag(), acc.real()) / m_power;
        if (have_prev) th += sector * std::round((prev - th) / sector);
        theta[w] = th;
        prev = th;
        have_prev = true;
        ++good;
    }
    if (good == 0) throw degenerate_window("mth_power_phase: all windows degenerate");
    return theta;
}

DelayPeak synchronize_frame(std::span<const cplx> symbols, std::span<const cplx> header,
                            double threshold) {
    DelayPeak peak = correlate_delay(symbols, header);
    if (peak.metric < threshold)
        throw sync_failed("synchronize_frame: correlation peak below threshold");
    return peak;
}

cvec apply_residual_phase(std::span<const cplx> symbols, std::span<const double> theta,
                          int n_window, std::ptrdiff_t symbol_offset, int branch) {
    cvec out(symbols.size());
    const double branch_phase = 0.5 * kPi * branch;
    const std::ptrdiff_t nw = static_cast<std::ptrdiff_t>(theta.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        std::ptrdiff_t w = (symbol_offset + static_cast<std::ptrdiff_t>(i)) /
                           static_cast<std::ptrdiff_t>(n_window);
        w = std::clamp<std::ptrdiff_t>(w, 0, nw - 1);
        const double ph = theta[static_cast<std::size_t>(w)] + branch_phase;
        out[i] = symbols[i] * cplx(std::cos(ph), -std::sin(ph));
    }
    return out;
}

namespace {

QpskDemod demodulate_stream(const cvec& mf, SyncState& state, int sps) {
    QpskDemod out;
    const std::size_t count =
        (mf.size() - static_cast<std::size_t>(state.optimum_sample) + sps - 1) / sps;
    cvec stream(count);
    for (std::size_t m = 0; m < count; ++m)
        stream[m] = mf[static_cast<std::size_t>(state.optimum_sample) + m * sps];

    state.residual_theta = mth_power_phase(stream, 4, state.mth_window, /*lenient=*/true);
    out.symbols = apply_residual_phase(stream, state.residual_theta, state.mth_window, 0, 0);
    out.bits = qpsk_hard_bits(out.symbols);
    return out;
}

}  // namespace

QpskDemod demodulate_qpsk(const ComplexSeries& compensated, SyncState& state,
                          const FrameLayout& layout, const RrcFilter& rrc) {
    ComplexSeries bb = frequency_shift(compensated, -state.f_qpsk_rx);
    cvec mf = filter_same(bb.samples, rrc.taps);
    return demodulate_stream(mf, state, layout.sps());
}

std::pair<cvec, cvec> extract_quantum_symbols(const ComplexSeries& compensated,
                                              const SyncState& state,
                                              const FrameLayout& layout,
                                              const RrcFilter& rrc) {
    ComplexSeries bb = frequency_shift(compensated, -state.f_quantum_rx);
    const std::ptrdiff_t start = state.frame_start_sample(layout.sps());
    cvec syms = matched_filter_decimate(bb.samples, rrc, start, layout.frame_symbols());
    cvec corrected = apply_residual_phase(syms, state.residual_theta, state.mth_window,
                                          state.frame_delay, state.constellation_branch);
    cvec ref(corrected.begin(), corrected.begin() + static_cast<std::ptrdiff_t>(layout.n_reference));
    cvec key(corrected.begin() + static_cast<std::ptrdiff_t>(layout.n_reference), corrected.end());
    return {std::move(ref), std::move(key)};
}

cvec correct_bulk_phase(std::span<const cplx> symbols, std::span<const cplx> ref_rx,
                        const CazacSequence& ref_tx, double* phase_out) {
    if (ref_rx.size() != ref_tx.values.size())
        throw length_mismatch("correct_bulk_phase: reference length mismatch");
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < ref_rx.size(); ++i)
        acc += std::conj(ref_tx.values[i]) * ref_rx[i];
    if (std::abs(acc) < 1e-12) throw degenerate_input("correct_bulk_phase: vanishing reference sum");
    const double phi = std::atan2(acc.imag(), acc.real());
    if (phase_out) *phase_out = phi;
    const cplx rot(std::cos(phi), -std::sin(phi));
    cvec out(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) out[i] = symbols[i] * rot;
    return out;
}

// ---- full chain ---------------------------------------------------------

Receiver::Receiver(FrameLayout layout, UkfConfig ukf, ReceiverOptions options)
    : layout_(std::move(layout)), ukf_(ukf), options_(options) {
    layout_.validate();
    rrc_ = design_rrc(layout_.rolloff, layout_.rrc_span, layout_.sps());
    header_ = qpsk_known_header(layout_.n_qpsk_header);
}

namespace {

// Pilot burst gate: block power envelope against a quarter of the peak
// block. Returns [lo, hi) sample range where the pilot is live.
std::pair<std::size_t, std::size_t> pilot_gate(const cvec& pilot) {
    constexpr std::size_t kBlock = 8192;
    const std::size_t nb = std::max<std::size_t>(pilot.size() / kBlock, 1);
    std::vector<double> power(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = b * kBlock;
        const std::size_t hi = (b + 1 == nb) ? pilot.size() : lo + kBlock;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += std::norm(pilot[i]);
        power[b] = acc / static_cast<double>(hi - lo);
    }
    const double peak = *std::max_element(power.begin(), power.end());
    const double thr = 0.25 * peak;
    std::size_t first = nb, last = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        if (power[b] > thr) {
            first = std::min(first, b);
            last = b;
        }
    }
    if (first >= nb) return {0, pilot.size()};
    // shave the partially filled edge blocks so the tracker only ever sees
    // live pilot
    if (last - first >= 2) {
        ++first;
        --last;
    }
    const std::size_t lo = first * kBlock;
    const std::size_t hi = (last + 1 == nb) ? pilot.size() : (last + 1) * kBlock;
    return {lo, hi};
}

}  // namespace

RecoveredFrame Receiver::process(const ComplexSeries& record) const {
    const bool trace = std::getenv("CVQKD_TRACE") != nullptr;
    const int sps = layout_.sps();
    const double nyq = record.nyquist();
    SyncState state;

    // block 1: locate the pilot pair. The strongest tone is one pilot; its
    // partner sits one transmitted spacing away, stretched by the unknown
    // clock ratio.
    const double margin = 1e6;
    const double spacing = layout_.pilot_spacing();
    const double window = 1.2e-3 * spacing + 2e5;  // skew bound plus slack
    TonePeak first, partner;
    partner.power = -1.0;
    {
        ToneSearch search(record);
        first = search.find(margin, nyq - margin);
        for (double center : {first.frequency + spacing, first.frequency - spacing}) {
            const double lo = std::max(center - window, margin);
            const double hi = std::min(center + window, nyq - margin);
            if (!(lo < hi)) continue;
            try {
                TonePeak p = search.find(lo, hi);
                if (p.power > partner.power) partner = p;
            } catch (const band_empty&) {
            }
        }
    }
    if (partner.power <= 0.0) throw sync_failed("receiver: second pilot not found");
    state.f_pilot1_rx = std::max(first.frequency, partner.frequency);
    state.f_pilot2_rx = std::min(first.frequency, partner.frequency);

    // block 2: clock ratio from the pilot spacing, then resample the record
    // onto the transmitter's clock (the digital interpolator standing in for
    // a recovery VCO)
    ComplexSeries work = record;
    if (options_.skew_compensation) {
        state.delta_f = estimate_skew(state.f_pilot1_rx, state.f_pilot2_rx, spacing);
        if (std::abs(state.delta_f - 1.0) > 1e-3)
            throw sync_failed("receiver: clock ratio outside the 1000 ppm sanity bound");
        if (state.delta_f != 1.0) {
            work = resample(work, state.delta_f);
            work.sample_rate = record.sample_rate;  // corrected record is on the tx clock
        }
    } else {
        state.delta_f = 1.0;
    }

    // refined pilot-1 position on the corrected record anchors the LO offset
    const double p1_expect = state.f_pilot1_rx / state.delta_f;
    TonePeak p1 = estimate_tone(work, p1_expect - 1e6, p1_expect + 1e6);
    const double lo_offset_hat = p1.frequency - layout_.f_pilot1;
    state.f_quantum_rx = layout_.f_quantum + lo_offset_hat;
    state.f_qpsk_rx = layout_.f_qpsk + lo_offset_hat;

    // block 3: isolate the pilot, shift it to baseband, track its phase
    ComplexSeries pilot_band = bandpass_fft(work, p1.frequency, options_.pilot_mask_halfwidth);
    ComplexSeries pilot_bb = frequency_shift(pilot_band, -p1.frequency);
    const auto [gate_lo, gate_hi] = pilot_gate(pilot_bb.samples);

    UkfConfig ukf = ukf_;
    if (ukf.measurement_noise <= 0.0) {
        // in-band noise floor, with a relative floor absorbing interpolation
        // and filter-truncation residue in noise-free runs
        const double band_fraction = 2.0 * options_.pilot_mask_halfwidth / work.sample_rate;
        ukf.measurement_noise = std::max(options_.noise_floor_snu * band_fraction,
                                         5e-5 * mean_power(pilot_bb.samples));
    }
    ComplexSeries gated;
    gated.sample_rate = pilot_bb.sample_rate;
    gated.samples.assign(pilot_bb.samples.begin() + static_cast<std::ptrdiff_t>(gate_lo),
                         pilot_bb.samples.begin() + static_cast<std::ptrdiff_t>(gate_hi));
    std::vector<double> tracked = ukf_track_phase(gated, ukf);

    state.phase_track.assign(work.size(), 0.0);
    for (std::size_t i = 0; i < gate_lo; ++i) state.phase_track[i] = tracked.front();
    std::copy(tracked.begin(), tracked.end(), state.phase_track.begin() + static_cast<std::ptrdiff_t>(gate_lo));
    for (std::size_t i = gate_hi; i < work.size(); ++i) state.phase_track[i] = tracked.back();

    // block 4
    ComplexSeries compensated = compensate_phase(work, state.phase_track);

    // blocks 5-6: optimum decimation point from the QPSK band
    ComplexSeries qpsk_bb = frequency_shift(compensated, -state.f_qpsk_rx);
    cvec qpsk_mf = filter_same(qpsk_bb.samples, rrc_.taps);
    state.optimum_sample = select_optimum_sample(qpsk_mf, sps);
    state.mth_window = options_.mth_window;

    // block 7: QPSK symbol stream and residual phase
    QpskDemod demod = demodulate_stream(qpsk_mf, state, sps);

    // block 8: frame alignment on the known header
    DelayPeak peak = synchronize_frame(demod.symbols, header_, options_.sync_threshold);
    state.frame_delay = peak.lag;
    state.sync_metric = peak.metric;
    state.forced_offset = options_.forced_delay_error;
    if (trace)
        std::fprintf(stderr,
                     "trace: pilots %.6f/%.6f MHz df=%.9f lo=%.3f k0=%d m0=%td metric=%.4f\n",
                     state.f_pilot1_rx / 1e6, state.f_pilot2_rx / 1e6, state.delta_f,
                     state.f_qpsk_rx - layout_.f_qpsk, state.optimum_sample, state.frame_delay,
                     state.sync_metric);

    const std::size_t n_frame = layout_.frame_symbols();
    // the frame's QPSK symbols, re-filtered on the synchronized grid so a
    // forced timing error shows up in the bits as well
    cvec qpsk_frame = matched_filter_decimate(qpsk_bb.samples, rrc_,
                                              state.frame_start_sample(sps), n_frame);
    qpsk_frame = apply_residual_phase(qpsk_frame, state.residual_theta, state.mth_window,
                                      state.frame_delay, 0);

    // resolve the pi/2 constellation ambiguity against the header
    int best_branch = 0;
    double best_corr = -1e300;
    for (int r = 0; r < 4; ++r) {
        const cplx rot(std::cos(0.5 * kPi * r), -std::sin(0.5 * kPi * r));
        double corr = 0.0;
        for (std::size_t i = 0; i < header_.size(); ++i)
            corr += (std::conj(header_[i]) * (qpsk_frame[i] * rot)).real();
        if (corr > best_corr) {
            best_corr = corr;
            best_branch = r;
        }
    }
    state.constellation_branch = best_branch;
    {
        const cplx rot(std::cos(0.5 * kPi * best_branch), -std::sin(0.5 * kPi * best_branch));
        for (auto& v : qpsk_frame) v *= rot;
    }

    RecoveredFrame out;
    out.qpsk_symbols_rx = std::move(qpsk_frame);
    out.qpsk_bits = qpsk_hard_bits(out.qpsk_symbols_rx);

    const std::size_t id_symbols = kFrameIdBits * kFrameIdRepeat / 2;
    if (out.qpsk_symbols_rx.size() >= layout_.n_qpsk_header + id_symbols) {
        out.frame_id = decode_frame_id_soft(std::span<const cplx>(out.qpsk_symbols_rx)
                                                .subspan(layout_.n_qpsk_header, id_symbols));
    }

    // blocks 9-10: quantum band extraction and CAZAC bulk phase
    auto [ref_rx, key_rx] = extract_quantum_symbols(compensated, state, layout_, rrc_);
    const CazacSequence caz = generate_cazac(layout_.n_reference, 7);
    cvec all(ref_rx.begin(), ref_rx.end());
    all.insert(all.end(), key_rx.begin(), key_rx.end());
    cvec corrected = correct_bulk_phase(all, ref_rx, caz, &state.bulk_phase);

    out.reference_symbols_rx.assign(corrected.begin(),
                                    corrected.begin() + static_cast<std::ptrdiff_t>(layout_.n_reference));
    out.quantum_symbols.assign(corrected.begin() + static_cast<std::ptrdiff_t>(layout_.n_reference),
                               corrected.end());
    out.sync = std::move(state);
    return out;
}

}  // namespace cvqkd
