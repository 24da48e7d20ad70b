#include "cvqkd/frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "cvqkd/rng.hpp"

namespace cvqkd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double band_halfwidth(double symbol_rate, double rolloff) {
    return 0.5 * symbol_rate * (1.0 + rolloff);
}
}  // namespace

void FrameLayout::validate() const {
    if (n_reference > n_quantum) throw invalid_config("layout: n_reference > n_quantum");
    if (!(symbol_rate > 0.0) || !(dac_rate > 0.0)) throw invalid_config("layout: rates must be positive");
    const double ratio = dac_rate / symbol_rate;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 2.0)
        throw invalid_config("layout: dac_rate must be an integer multiple of symbol_rate");
    if (!(rolloff > 0.0) || rolloff > 1.0) throw invalid_config("layout: rolloff outside (0, 1]");
    if (rrc_span < 4) throw invalid_config("layout: rrc_span < 4");

    // all four bands must fit below Nyquist without overlapping
    const double hw = band_halfwidth(symbol_rate, rolloff);
    const double nyq = 0.5 * dac_rate;
    struct Band { double lo, hi; };
    const Band bands[] = {
        {f_quantum - hw, f_quantum + hw},
        {f_qpsk - hw, f_qpsk + hw},
        {f_pilot1, f_pilot1},
        {f_pilot2, f_pilot2},
    };
    for (const auto& b : bands)
        if (!(b.lo > 0.0) || !(b.hi < nyq))
            throw invalid_config("layout: band leaves (0, Nyquist)");
    for (std::size_t i = 0; i < std::size(bands); ++i)
        for (std::size_t j = i + 1; j < std::size(bands); ++j) {
            const bool disjoint = bands[i].hi < bands[j].lo || bands[j].hi < bands[i].lo;
            if (!disjoint) throw invalid_config("layout: spectral bands overlap");
        }
}

QuantumSymbols draw_gaussian_symbols(std::size_t n, double nbar, std::uint64_t seed) {
    if (!(nbar > 0.0)) throw invalid_parameter("draw_gaussian_symbols: nbar <= 0");
    if (n < 1) throw invalid_parameter("draw_gaussian_symbols: n < 1");
    QuantumSymbols q;
    q.mean_photon_number = nbar;
    q.seed = seed;
    q.values.resize(n);
    GaussianSampler g(seed);
    const double s = std::sqrt(nbar);  // per-quadrature std so E|a|^2 = 2 nbar
    for (auto& v : q.values) v = s * g.complex_unit();
    return q;
}

CazacSequence generate_cazac(std::size_t length, int root) {
    if (length < 2) throw invalid_parameter("generate_cazac: length < 2");
    if (root <= 0 || std::gcd<long long>(root, static_cast<long long>(length)) != 1)
        throw invalid_parameter("generate_cazac: root not coprime with length");
    CazacSequence z;
    z.length = length;
    z.root = root;
    z.values.resize(length);
    const double L = static_cast<double>(length);
    for (std::size_t k = 0; k < length; ++k) {
        // Zadoff-Chu; quadratic phase for even length, k(k+1) for odd
        const double kk = static_cast<double>(k);
        const double arg = (length % 2 == 0) ? kk * kk : kk * (kk + 1.0);
        const double phase = -std::numbers::pi * root * arg / L;
        z.values[k] = cplx(std::cos(phase), std::sin(phase));
    }
    return z;
}

cplx qpsk_point(int index) {
    static const cplx pts[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    return pts[index & 3];
}

int qpsk_decide(const cplx& y) {
    const double ang = std::atan2(y.imag(), y.real());
    int idx = static_cast<int>(std::lround(ang / (0.5 * std::numbers::pi)));
    return (idx % 4 + 4) % 4;
}

namespace {
// Gray map: bit pair -> constellation index and back
constexpr int kBitsToIndex[4] = {0, 1, 3, 2};     // b0b1: 00 01 10 11
constexpr int kIndexToBits[4] = {0, 1, 3, 2};     // index -> b0b1 packed
}  // namespace

cvec qpsk_modulate(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) throw invalid_parameter("qpsk_modulate: odd bit count");
    cvec out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int pair = (bits[2 * i] << 1) | bits[2 * i + 1];
        out[i] = qpsk_point(kBitsToIndex[pair]);
    }
    return out;
}

std::vector<std::uint8_t> qpsk_hard_bits(std::span<const cplx> symbols) {
    std::vector<std::uint8_t> bits(symbols.size() * 2);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const int pair = kIndexToBits[qpsk_decide(symbols[i])];
        bits[2 * i] = static_cast<std::uint8_t>((pair >> 1) & 1);
        bits[2 * i + 1] = static_cast<std::uint8_t>(pair & 1);
    }
    return bits;
}

cvec QpskFrame::symbols() const {
    cvec all;
    all.reserve(header.size() + payload_symbols.size() + filler.size());
    all.insert(all.end(), header.begin(), header.end());
    all.insert(all.end(), payload_symbols.begin(), payload_symbols.end());
    all.insert(all.end(), filler.begin(), filler.end());
    return all;
}

std::vector<std::uint8_t> QpskFrame::bits() const { return qpsk_hard_bits(symbols()); }

cvec qpsk_known_header(std::size_t n) {
    // fixed pseudo-random sequence shared by transmitter and receiver
    GaussianSampler g(0x434c4b48u);
    cvec h(n);
    for (auto& v : h) v = qpsk_point(static_cast<int>(g.raw() & 3));
    return h;
}

QpskFrame make_qpsk_frame(const FrameLayout& layout, std::uint32_t frame_id, std::uint64_t seed) {
    if (frame_id >= (1u << kFrameIdBits))
        throw invalid_parameter("make_qpsk_frame: frame_id does not fit in 16 bits");
    QpskFrame f;
    f.frame_id = frame_id;
    f.header = qpsk_known_header(layout.n_qpsk_header);

    std::vector<std::uint8_t> id_bits;
    id_bits.reserve(kFrameIdBits * kFrameIdRepeat);
    for (std::size_t b = 0; b < kFrameIdBits; ++b) {
        const std::uint8_t bit = static_cast<std::uint8_t>((frame_id >> (kFrameIdBits - 1 - b)) & 1);
        for (std::size_t r = 0; r < kFrameIdRepeat; ++r) id_bits.push_back(bit);
    }
    f.payload_symbols = qpsk_modulate(id_bits);

    const std::size_t total = layout.frame_symbols();
    const std::size_t used = f.header.size() + f.payload_symbols.size();
    if (used > total) throw layout_mismatch("make_qpsk_frame: header + id exceed frame length");
    GaussianSampler g(derive_seed(seed, 0x71736b66u));
    f.filler.resize(total - used);
    for (auto& v : f.filler) v = qpsk_point(static_cast<int>(g.raw() & 3));
    return f;
}

std::uint32_t decode_frame_id(std::span<const std::uint8_t> payload_bits) {
    if (payload_bits.size() < kFrameIdBits * kFrameIdRepeat)
        throw length_mismatch("decode_frame_id: not enough bits");
    std::uint32_t id = 0;
    for (std::size_t b = 0; b < kFrameIdBits; ++b) {
        int ones = 0;
        for (std::size_t r = 0; r < kFrameIdRepeat; ++r)
            ones += payload_bits[b * kFrameIdRepeat + r];
        const std::uint32_t bit = ones * 2 >= static_cast<int>(kFrameIdRepeat) ? 1u : 0u;
        id = (id << 1) | bit;
    }
    return id;
}

std::uint32_t decode_frame_id_soft(std::span<const cplx> payload_symbols) {
    const std::size_t n_bits = kFrameIdBits * kFrameIdRepeat;
    if (payload_symbols.size() < n_bits / 2)
        throw length_mismatch("decode_frame_id_soft: not enough symbols");
    // Gray map soft metrics: bit0 <-> -(Re + Im), bit1 <-> (Im - Re)
    std::vector<double> soft(n_bits);
    for (std::size_t k = 0; k < n_bits / 2; ++k) {
        const cplx y = payload_symbols[k];
        soft[2 * k] = -(y.real() + y.imag());
        soft[2 * k + 1] = y.imag() - y.real();
    }
    std::uint32_t id = 0;
    for (std::size_t b = 0; b < kFrameIdBits; ++b) {
        double acc = 0.0;
        for (std::size_t r = 0; r < kFrameIdRepeat; ++r)
            acc += soft[b * kFrameIdRepeat + r];
        id = (id << 1) | (acc > 0.0 ? 1u : 0u);
    }
    return id;
}

ComplexSeries build_frame(const FrameLayout& layout, const QuantumSymbols& quantum,
                          const CazacSequence& ref, const QpskFrame& qpsk,
                          std::uint64_t seed) {
    layout.validate();
    if (quantum.values.size() != layout.n_quantum)
        throw layout_mismatch("build_frame: quantum symbol count");
    if (ref.length != layout.n_reference)
        throw layout_mismatch("build_frame: reference symbol count");
    const cvec qpsk_syms = qpsk.symbols();
    if (!qpsk_syms.empty() && qpsk_syms.size() != layout.frame_symbols())
        throw layout_mismatch("build_frame: qpsk stream length");

    const double nbar = quantum.mean_photon_number;
    const int sps = layout.sps();
    const RrcFilter rrc = design_rrc(layout.rolloff, layout.rrc_span, sps);

    // Symbol amplitudes map to the waveform with a 1/sqrt(2) heterodyne
    // split, so a recovered symbol obeys b = sqrt(tau/2) a + z with unit
    // vacuum per quadrature. References carry the same power as key symbols.
    const double key_scale = 1.0 / std::sqrt(2.0);
    const double ref_scale = std::sqrt(nbar);  // |cazac| = 1 -> same power as keys
    cvec stream;
    stream.reserve(layout.frame_symbols());
    for (const auto& c : ref.values) stream.push_back(ref_scale * c);
    for (const auto& a : quantum.values) stream.push_back(key_scale * a);

    ComplexSeries out;
    out.sample_rate = layout.dac_rate;
    const std::size_t n_samples = layout.frame_samples();
    out.samples.assign(n_samples, cplx(0.0, 0.0));

    if (!stream.empty()) {
        cvec shaped = shape_symbols(stream, rrc);
        ComplexSeries tmp{std::move(shaped), layout.dac_rate};
        tmp = frequency_shift(tmp, layout.f_quantum);
        for (std::size_t i = 0; i < tmp.size() && i < n_samples; ++i) out.samples[i] += tmp.samples[i];
    }
    if (!qpsk_syms.empty()) {
        const double qpsk_scale =
            std::sqrt(nbar * std::pow(10.0, layout.qpsk_power_offset_db / 10.0));
        cvec scaled(qpsk_syms.size());
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = qpsk_scale * qpsk_syms[i];
        cvec shaped = shape_symbols(scaled, rrc);
        ComplexSeries tmp{std::move(shaped), layout.dac_rate};
        tmp = frequency_shift(tmp, layout.f_qpsk);
        for (std::size_t i = 0; i < tmp.size() && i < n_samples; ++i) out.samples[i] += tmp.samples[i];
    }

    // pilots sit pilot_power_offset_db above the quantum band's average
    // sample power nbar/sps
    const double pilot_amp =
        std::sqrt(std::pow(10.0, layout.pilot_power_offset_db / 10.0) * nbar / sps);
    std::uint64_t s = seed;
    const double ph1 = kTwoPi * (splitmix64(s) >> 11) * 0x1.0p-53;
    const double ph2 = kTwoPi * (splitmix64(s) >> 11) * 0x1.0p-53;
    for (double f_p : {layout.f_pilot1, layout.f_pilot2}) {
        const double ph0 = (f_p == layout.f_pilot1) ? ph1 : ph2;
        const double w = kTwoPi * f_p / layout.dac_rate;
        const cplx step(std::cos(w), std::sin(w));
        cplx rot(std::cos(ph0), std::sin(ph0));
        constexpr std::size_t block = 4096;
        for (std::size_t n = 0; n < n_samples; ++n) {
            if (n % block == 0) rot = cplx(std::cos(ph0 + w * n), std::sin(ph0 + w * n));
            out.samples[n] += pilot_amp * rot;
            rot *= step;
        }
    }
    return out;
}

// -- waveform container --------------------------------------------------

namespace {
constexpr char kMagic[16] = {'C', 'V', 'Q', 'K', 'D', 'W', 'A', 'V',
                             0, 0, 0, 0, 0, 0, 0, 0};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_waveform(const std::string& path, const ComplexSeries& x) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("write_waveform: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    const std::uint32_t ver = kVersion;
    const double rate = x.sample_rate;
    const std::uint64_t len = x.size();
    f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    f.write(reinterpret_cast<const char*>(&rate), sizeof(rate));
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    std::vector<float> iq(2 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        iq[2 * i] = static_cast<float>(x.samples[i].real());
        iq[2 * i + 1] = static_cast<float>(x.samples[i].imag());
    }
    f.write(reinterpret_cast<const char*>(iq.data()),
            static_cast<std::streamsize>(iq.size() * sizeof(float)));
    if (!f) throw io_error("write_waveform: write failed on " + path);
}

ComplexSeries read_waveform(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("read_waveform: cannot open " + path);
    char magic[16];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw io_error("read_waveform: bad magic in " + path);
    std::uint32_t ver = 0;
    double rate = 0.0;
    std::uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    f.read(reinterpret_cast<char*>(&rate), sizeof(rate));
    f.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!f || ver != kVersion) throw io_error("read_waveform: unsupported version");
    std::vector<float> iq(2 * len);
    f.read(reinterpret_cast<char*>(iq.data()),
           static_cast<std::streamsize>(iq.size() * sizeof(float)));
    if (!f) throw io_error("read_waveform: truncated file " + path);
    ComplexSeries x;
    x.sample_rate = rate;
    x.samples.resize(len);
    for (std::uint64_t i = 0; i < len; ++i)
        x.samples[i] = cplx(iq[2 * i], iq[2 * i + 1]);
    return x;
}

void write_symbols_csv(const std::string& path, std::span<const SymbolRecord> rows) {
    std::ofstream f(path);
    if (!f) throw io_error("write_symbols_csv: cannot open " + path);
    f << "frame_id,index,kind,real,imag\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%u,%zu,%s,%.17g,%.17g\n", r.frame_id, r.index,
                      r.kind, r.value.real(), r.value.imag());
        f << buf;
    }
    if (!f) throw io_error("write_symbols_csv: write failed on " + path);
}

}  // namespace cvqkd
