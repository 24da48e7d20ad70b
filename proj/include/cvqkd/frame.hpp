#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "cvqkd/dsp.hpp"
#include "cvqkd/types.hpp"

namespace cvqkd {

/// Symbol counts, rates and multiplexing frequencies for one transmission
/// frame. Defaults: 20 MBaud streams at 1 GS/s (50 samples per symbol),
/// quantum band at 160 MHz, pilots at 120 / 25 MHz, QPSK at 80 MHz with a
/// +7 dB power offset, RRC roll-off 0.2.
struct FrameLayout {
    std::size_t n_quantum = 10000;
    std::size_t n_reference = 2000;
    std::size_t n_qpsk_header = 2000;
    double symbol_rate = 20e6;
    double dac_rate = 1e9;
    double f_quantum = 160e6;
    double f_pilot1 = 120e6;
    double f_pilot2 = 25e6;
    double f_qpsk = 80e6;
    double qpsk_power_offset_db = 7.0;
    double pilot_power_offset_db = 10.0;  // each pilot vs quantum-band power
    double rolloff = 0.2;
    int rrc_span = 30;  // symbols; keeps matched-filter truncation error below 1e-6

    int sps() const { return static_cast<int>(dac_rate / symbol_rate); }
    std::size_t frame_symbols() const { return n_reference + n_quantum; }
    // shaped waveform carries half a filter span of lead-in and tail
    std::size_t frame_samples() const { return frame_symbols() * sps() + static_cast<std::size_t>(rrc_span) * sps(); }
    double pilot_spacing() const { return f_pilot1 - f_pilot2; }

    void validate() const;  // throws invalid_config
};

/// Gaussian quantum symbols, E|a|^2 = 2 nbar (SNU amplitude convention:
/// vacuum variance 1 per quadrature, modulation variance 2 nbar).
struct QuantumSymbols {
    cvec values;
    double mean_photon_number = 0.0;
    std::uint64_t seed = 0;
};

QuantumSymbols draw_gaussian_symbols(std::size_t n, double nbar, std::uint64_t seed);

/// Zadoff-Chu constant-amplitude zero-autocorrelation sequence.
struct CazacSequence {
    std::size_t length = 0;
    int root = 0;
    cvec values;
};

CazacSequence generate_cazac(std::size_t length, int root);

// -- QPSK helpers -------------------------------------------------------
// Constellation {1, j, -1, -j}, Gray bit mapping 00 01 11 10.

cplx qpsk_point(int index);
int qpsk_decide(const cplx& y);
cvec qpsk_modulate(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> qpsk_hard_bits(std::span<const cplx> symbols);

/// QPSK side channel for one frame: a fixed known header, the frame id
/// encoded as 16 bits with 8x repetition, then seeded filler out to the
/// frame length.
struct QpskFrame {
    cvec header;
    std::uint32_t frame_id = 0;
    cvec payload_symbols;  // 64 symbols carrying the id
    cvec filler;

    cvec symbols() const;
    std::vector<std::uint8_t> bits() const;
};

inline constexpr std::size_t kFrameIdBits = 16;
inline constexpr std::size_t kFrameIdRepeat = 8;

cvec qpsk_known_header(std::size_t n);
QpskFrame make_qpsk_frame(const FrameLayout& layout, std::uint32_t frame_id, std::uint64_t seed);
// hard-decision majority vote over the repeats
std::uint32_t decode_frame_id(std::span<const std::uint8_t> payload_bits);
// soft combining across repeats; noticeably more reliable at low SNR
std::uint32_t decode_frame_id_soft(std::span<const cplx> payload_symbols);

/// Transmitter frame synthesis: CAZAC reference symbols prepended to the
/// quantum symbols at equal power, both streams RRC shaped, frequency
/// multiplexed with the QPSK signal and two pilot tones. The seed sets the
/// (arbitrary) pilot start phases.
ComplexSeries build_frame(const FrameLayout& layout, const QuantumSymbols& quantum,
                          const CazacSequence& ref, const QpskFrame& qpsk,
                          std::uint64_t seed);

// -- waveform container -------------------------------------------------
// 16-byte magic ("CVQKDWAV" + NUL padding), little-endian u32 version,
// f64 sample rate, u64 length, interleaved f32 I/Q.

void write_waveform(const std::string& path, const ComplexSeries& x);
ComplexSeries read_waveform(const std::string& path);

struct SymbolRecord {
    std::uint32_t frame_id;
    std::size_t index;
    const char* kind;  // "ref" | "key" | "qpsk"
    cplx value;
};
void write_symbols_csv(const std::string& path, std::span<const SymbolRecord> rows);

}  // namespace cvqkd
