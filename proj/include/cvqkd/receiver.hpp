#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "cvqkd/dsp.hpp"
#include "cvqkd/frame.hpp"
#include "cvqkd/types.hpp"
#include "cvqkd/ukf.hpp"

namespace cvqkd {

/// Everything the synchronization chain learns about one frame.
struct SyncState {
    double f_pilot1_rx = 0.0;   // Hz, apparent (receiver clock)
    double f_pilot2_rx = 0.0;
    double delta_f = 1.0;       // transmitter hertz per receiver hertz
    double f_quantum_rx = 0.0;  // downconversion frequencies after clock correction
    double f_qpsk_rx = 0.0;
    std::vector<double> phase_track;     // per-sample, radians
    int optimum_sample = 0;              // in [0, sps)
    std::ptrdiff_t frame_delay = 0;      // symbols
    double sync_metric = 0.0;
    std::vector<double> residual_theta;  // per M-th power window
    int mth_window = 256;                // symbols per residual-phase window
    int constellation_branch = 0;        // resolved pi/2 ambiguity, 0..3
    double bulk_phase = 0.0;             // radians, block-10 correction
    std::ptrdiff_t forced_offset = 0;    // diagnostic extra delay, samples

    std::ptrdiff_t frame_start_sample(int sps) const {
        return optimum_sample + frame_delay * sps + forced_offset;
    }
};

// Eq.-style clock ratio from the received pilot pair; invariant under any
// common additive frequency offset.
double estimate_skew(double f1_rx, double f2_rx, double pilot_spacing_tx);

ComplexSeries compensate_phase(const ComplexSeries& x, std::span<const double> phases);

// argmax over k in [0, sps) of the mean power of the k-th polyphase of a
// matched-filtered baseband; ties break toward smaller k
int select_optimum_sample(std::span<const cplx> qpsk_mf_baseband, int sps);

// Blind M-th power carrier phase per non-overlapping window of n_window
// symbols, unwrapped modulo 2 pi / M across windows. A window whose summed
// M-th power vanishes raises degenerate_window; with lenient = true such a
// window inherits the previous phase instead (used on records whose leading
// region carries no signal), and only an all-degenerate input throws.
std::vector<double> mth_power_phase(std::span<const cplx> symbols, int m_power, int n_window,
                                    bool lenient = false);

// Cross-correlation frame search; throws sync_failed below threshold.
DelayPeak synchronize_frame(std::span<const cplx> symbols, std::span<const cplx> header,
                            double threshold = 0.4);

// M-th power residual phase applied piecewise-constant per window plus the
// resolved constellation branch.
cvec apply_residual_phase(std::span<const cplx> symbols, std::span<const double> theta,
                          int n_window, std::ptrdiff_t symbol_offset, int branch);

struct QpskDemod {
    cvec symbols;                    // theta-corrected symbol stream
    std::vector<std::uint8_t> bits;  // hard decisions on the stream
};

// Blocks 5-7 on a phase-compensated record: downconvert, matched filter,
// decimate at the optimum sample, M-th power correction, hard decisions.
// Fills state.residual_theta.
QpskDemod demodulate_qpsk(const ComplexSeries& compensated, SyncState& state,
                          const FrameLayout& layout, const RrcFilter& rrc);

// Block 9 on a phase-compensated record: downconvert the quantum band,
// matched filter on the synchronized grid, apply the residual phase track.
// Returns (reference_rx, key_rx); bulk rotation is a separate step.
std::pair<cvec, cvec> extract_quantum_symbols(const ComplexSeries& compensated,
                                              const SyncState& state,
                                              const FrameLayout& layout,
                                              const RrcFilter& rrc);

// Block 10: remove the bulk rotation measured on the CAZAC references.
cvec correct_bulk_phase(std::span<const cplx> symbols, std::span<const cplx> ref_rx,
                        const CazacSequence& ref_tx, double* phase_out = nullptr);

struct ReceiverOptions {
    bool skew_compensation = true;
    double sync_threshold = 0.4;
    double pilot_mask_halfwidth = 2e6;  // Hz
    int mth_window = 1024;              // symbols
    std::ptrdiff_t forced_delay_error = 0;  // samples, applied after sync
    double noise_floor_snu = 1.1;       // vacuum + v_el, used for pilot SNR bookkeeping
};

struct RecoveredFrame {
    cvec quantum_symbols;       // key symbols, bulk-corrected
    cvec reference_symbols_rx;  // received CAZAC symbols, bulk-corrected
    cvec qpsk_symbols_rx;       // the frame's QPSK symbols, branch-aligned
    std::vector<std::uint8_t> qpsk_bits;
    std::optional<std::uint32_t> frame_id;
    SyncState sync;
};

/// The full ten-block chain. One instance per worker; process() is const
/// and safe to call concurrently on different records.
class Receiver {
public:
    Receiver(FrameLayout layout, UkfConfig ukf, ReceiverOptions options = {});

    RecoveredFrame process(const ComplexSeries& record) const;

    const RrcFilter& rrc() const { return rrc_; }
    const FrameLayout& layout() const { return layout_; }

private:
    FrameLayout layout_;
    UkfConfig ukf_;
    ReceiverOptions options_;
    RrcFilter rrc_;
    cvec header_;
};

}  // namespace cvqkd
