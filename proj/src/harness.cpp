#include "cvqkd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cvqkd/fft.hpp"
#include "cvqkd/rng.hpp"

namespace cvqkd {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
    layout.validate();
    channel.validate();
    security.validate();
    if (n_frames < 1) throw invalid_config("run: n_frames < 1");
    if (!(mean_photon_number > 0.0)) throw invalid_config("run: mean photon number <= 0");
    if (!(ber_threshold > 0.0) || ber_threshold >= 0.5)
        throw invalid_config("run: ber threshold outside (0, 0.5)");
    if (calibration_frames < 1) throw invalid_config("run: calibration_frames < 1");
}

// ---- configuration grammar ----------------------------------------------
// One "section.key = value" per line. Blank lines and '#' comments allowed.

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw invalid_config("config: bad numeric value for " + key);
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw invalid_config("config: bad boolean value for " + key);
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw invalid_config("config: missing '=' on line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw invalid_config("config: empty key or value on line " + std::to_string(lineno));

        auto num = [&] { return to_double(val, key); };
        auto flag = [&] { return to_bool(val, key); };

        if (key == "layout.n_quantum") cfg.layout.n_quantum = static_cast<std::size_t>(num());
        else if (key == "layout.n_reference") cfg.layout.n_reference = static_cast<std::size_t>(num());
        else if (key == "layout.n_qpsk_header") cfg.layout.n_qpsk_header = static_cast<std::size_t>(num());
        else if (key == "layout.symbol_rate_hz") cfg.layout.symbol_rate = num();
        else if (key == "layout.dac_rate_hz") cfg.layout.dac_rate = num();
        else if (key == "layout.f_quantum_hz") cfg.layout.f_quantum = num();
        else if (key == "layout.f_pilot1_hz") cfg.layout.f_pilot1 = num();
        else if (key == "layout.f_pilot2_hz") cfg.layout.f_pilot2 = num();
        else if (key == "layout.f_qpsk_hz") cfg.layout.f_qpsk = num();
        else if (key == "layout.qpsk_power_offset_db") cfg.layout.qpsk_power_offset_db = num();
        else if (key == "layout.pilot_power_offset_db") cfg.layout.pilot_power_offset_db = num();
        else if (key == "layout.rolloff") cfg.layout.rolloff = num();
        else if (key == "layout.rrc_span") cfg.layout.rrc_span = static_cast<int>(num());
        else if (key == "channel.delay_us") cfg.channel.delay = num() * 1e-6;
        else if (key == "channel.skew") cfg.channel.skew = num();
        else if (key == "channel.lo_offset_hz") cfg.channel.lo_offset = num();
        else if (key == "channel.linewidth_hz") cfg.channel.linewidth_sum = num();
        else if (key == "channel.transmittance") cfg.channel.transmittance = num();
        else if (key == "channel.efficiency") cfg.channel.efficiency = num();
        else if (key == "channel.electronic_noise_snu") cfg.channel.electronic_noise = num();
        else if (key == "channel.excess_noise_mpnu") cfg.channel.excess_noise_pnu = num() * 1e-3;
        else if (key == "channel.adc_gain") cfg.channel.adc_gain = num();
        else if (key == "channel.noise_enabled") cfg.channel.noise_enabled = flag();
        else if (key == "ukf.process_noise_phase") cfg.ukf.process_noise_phase = num();
        else if (key == "ukf.process_noise_freq") cfg.ukf.process_noise_freq = num();
        else if (key == "ukf.measurement_noise") cfg.ukf.measurement_noise = num();
        else if (key == "ukf.sigma_point_spread") cfg.ukf.sigma_point_spread = num();
        else if (key == "ukf.divergence_nis") cfg.ukf.divergence_nis = num();
        else if (key == "ukf.divergence_fraction") cfg.ukf.divergence_fraction = num();
        else if (key == "security.beta") cfg.security.beta = num();
        else if (key == "security.trusted_receiver") cfg.security.trusted_receiver = flag();
        else if (key == "receiver.sync_threshold") cfg.receiver.sync_threshold = num();
        else if (key == "receiver.pilot_mask_halfwidth_hz") cfg.receiver.pilot_mask_halfwidth = num();
        else if (key == "receiver.mth_window") cfg.receiver.mth_window = static_cast<int>(num());
        else if (key == "receiver.skew_compensation") cfg.receiver.skew_compensation = flag();
        else if (key == "run.frames") cfg.n_frames = static_cast<std::size_t>(num());
        else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(num());
        else if (key == "run.mean_photon_number") cfg.mean_photon_number = num();
        else if (key == "run.ber_threshold") cfg.ber_threshold = num();
        else if (key == "run.calibration_frames") cfg.calibration_frames = static_cast<int>(num());
        else if (key == "run.forced_delay_error") cfg.forced_delay_error = static_cast<std::ptrdiff_t>(num());
        else if (key == "run.threads") cfg.threads = static_cast<int>(num());
        else if (key == "run.output_dir") cfg.output_dir = val;
        else if (key == "run.mode") {
            if (val == "shared") cfg.mode = ClockMode::SharedClock;
            else if (val == "free") cfg.mode = ClockMode::FreeRunning;
            else throw invalid_config("config: run.mode must be shared or free");
        } else {
            throw invalid_config("config: unknown key " + key);
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("config: cannot open " + path);
    return parse_config(f);
}

void dump_config(std::ostream& out, const ExperimentConfig& c) {
    char buf[160];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
        out << buf;
    };
    put("layout.n_quantum", static_cast<double>(c.layout.n_quantum));
    put("layout.n_reference", static_cast<double>(c.layout.n_reference));
    put("layout.n_qpsk_header", static_cast<double>(c.layout.n_qpsk_header));
    put("layout.symbol_rate_hz", c.layout.symbol_rate);
    put("layout.dac_rate_hz", c.layout.dac_rate);
    put("layout.f_quantum_hz", c.layout.f_quantum);
    put("layout.f_pilot1_hz", c.layout.f_pilot1);
    put("layout.f_pilot2_hz", c.layout.f_pilot2);
    put("layout.f_qpsk_hz", c.layout.f_qpsk);
    put("layout.qpsk_power_offset_db", c.layout.qpsk_power_offset_db);
    put("layout.pilot_power_offset_db", c.layout.pilot_power_offset_db);
    put("layout.rolloff", c.layout.rolloff);
    put("layout.rrc_span", c.layout.rrc_span);
    put("channel.delay_us", c.channel.delay * 1e6);
    put("channel.skew", c.channel.skew);
    put("channel.lo_offset_hz", c.channel.lo_offset);
    put("channel.linewidth_hz", c.channel.linewidth_sum);
    put("channel.transmittance", c.channel.transmittance);
    put("channel.efficiency", c.channel.efficiency);
    put("channel.electronic_noise_snu", c.channel.electronic_noise);
    put("channel.excess_noise_mpnu", c.channel.excess_noise_pnu * 1e3);
    put("channel.adc_gain", c.channel.adc_gain);
    out << "channel.noise_enabled = " << (c.channel.noise_enabled ? "true" : "false") << "\n";
    put("ukf.process_noise_phase", c.ukf.process_noise_phase);
    put("ukf.process_noise_freq", c.ukf.process_noise_freq);
    put("ukf.measurement_noise", c.ukf.measurement_noise);
    put("ukf.sigma_point_spread", c.ukf.sigma_point_spread);
    put("ukf.divergence_nis", c.ukf.divergence_nis);
    put("ukf.divergence_fraction", c.ukf.divergence_fraction);
    put("security.beta", c.security.beta);
    out << "security.trusted_receiver = " << (c.security.trusted_receiver ? "true" : "false") << "\n";
    put("receiver.sync_threshold", c.receiver.sync_threshold);
    put("receiver.pilot_mask_halfwidth_hz", c.receiver.pilot_mask_halfwidth);
    put("receiver.mth_window", c.receiver.mth_window);
    out << "receiver.skew_compensation = " << (c.receiver.skew_compensation ? "true" : "false") << "\n";
    put("run.frames", static_cast<double>(c.n_frames));
    put("run.seed", static_cast<double>(c.seed));
    out << "run.mode = " << (c.mode == ClockMode::SharedClock ? "shared" : "free") << "\n";
    put("run.mean_photon_number", c.mean_photon_number);
    put("run.ber_threshold", c.ber_threshold);
    put("run.calibration_frames", c.calibration_frames);
    put("run.forced_delay_error", static_cast<double>(c.forced_delay_error));
    put("run.threads", c.threads);
    out << "run.output_dir = " << c.output_dir << "\n";
}

// ---- batch run -----------------------------------------------------------

void RunReport::recompute_aggregates() {
    double sum = 0.0, sum2 = 0.0, skf_sum = 0.0, tau_sum = 0.0;
    std::size_t n_acc = 0;
    for (const auto& f : frames) {
        if (!f.accepted) continue;
        ++n_acc;
        sum += f.excess_noise_pnu;
        sum2 += f.excess_noise_pnu * f.excess_noise_pnu;
        skf_sum += f.skf;
        tau_sum += f.transmittance_hat;
    }
    if (n_acc > 0) {
        const double mean = sum / static_cast<double>(n_acc);
        mean_excess_mpnu = 1e3 * mean;
        const double var = std::max(sum2 / static_cast<double>(n_acc) - mean * mean, 0.0);
        std_excess_mpnu = 1e3 * std::sqrt(var);
        mean_skf = skf_sum / static_cast<double>(n_acc);
        mean_transmittance = tau_sum / static_cast<double>(n_acc);
    } else {
        mean_excess_mpnu = std_excess_mpnu = mean_skf = mean_transmittance = 0.0;
    }
    fraction_accepted =
        frames.empty() ? 0.0
                       : static_cast<double>(n_acc) / static_cast<double>(frames.size());
}

namespace {

enum FrameStream : std::uint64_t {
    kStreamSymbols = 0x51,
    kStreamQpsk = 0x52,
    kStreamBuild = 0x53,
    kStreamChannel = 0x54,
};

struct FrameContext {
    const ExperimentConfig* cfg;
    const CalibrationRecord* cal;
    const Receiver* receiver;
    SecurityParams sec;
    ChannelConfig channel;
};

FrameEstimate process_one_frame(const FrameContext& ctx, std::uint32_t frame_id,
                                bool* sync_ok) {
    const ExperimentConfig& cfg = *ctx.cfg;
    const std::uint64_t seed = cfg.seed;

    QuantumSymbols alice = draw_gaussian_symbols(
        cfg.layout.n_quantum, cfg.mean_photon_number, derive_seed(seed, kStreamSymbols, frame_id));
    CazacSequence caz = generate_cazac(cfg.layout.n_reference, 7);
    QpskFrame qpsk = make_qpsk_frame(cfg.layout, frame_id, derive_seed(seed, kStreamQpsk, frame_id));
    ComplexSeries wave = build_frame(cfg.layout, alice, caz, qpsk,
                                     derive_seed(seed, kStreamBuild, frame_id));

    ChannelConfig ch = ctx.channel;
    ch.seed = derive_seed(seed, kStreamChannel, frame_id);
    ComplexSeries raw = apply_channel(wave, ch);
    ComplexSeries record = normalize_to_snu(raw, *ctx.cal);

    FrameEstimate row;
    row.frame_id = frame_id;
    if (sync_ok) *sync_ok = true;
    try {
        RecoveredFrame rec = ctx.receiver->process(record);
        ChannelEstimate est =
            estimate_channel(alice.values, rec.quantum_symbols, cfg.mean_photon_number, ctx.sec);
        row.transmittance_hat = est.transmittance;
        row.excess_noise_pnu = est.excess_noise_pnu;
        row.ber = ber(rec.qpsk_bits, qpsk.bits());
        row.accepted = accept_frame(row.ber, cfg.ber_threshold);

        const double t_channel =
            std::clamp(est.transmittance / ctx.sec.detector_efficiency, 1e-6, 1.0);
        row.skf = secret_key_fraction(ctx.cal->modulation_variance, t_channel,
                                      std::max(est.excess_noise_pnu, 0.0), ctx.sec);
    } catch (const std::runtime_error&) {
        // unusable frame (lost sync, tracker divergence, short record):
        // reported, never fatal for the batch
        row.transmittance_hat = 0.0;
        row.excess_noise_pnu = 0.0;
        row.ber = 1.0;
        row.skf = 0.0;
        row.accepted = false;
        if (sync_ok) *sync_ok = false;
    }
    return row;
}

}  // namespace

RunReport run(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    if (cfg.mode == ClockMode::SharedClock) {
        // external clock reference and trigger: no skew, delay on the sample grid
        cfg.channel.skew = 1.0;
        cfg.channel.delay =
            std::round(cfg.channel.delay * cfg.channel.adc_rate) / cfg.channel.adc_rate;
    }
    cfg.receiver.forced_delay_error = cfg.forced_delay_error;
    cfg.validate();

    const auto t0 = std::chrono::steady_clock::now();

    RunReport report;
    report.config = cfg;
    report.calibration = run_calibration(cfg.channel, cfg.layout, cfg.mean_photon_number,
                                         derive_seed(cfg.seed, 0xca1), cfg.calibration_frames);

    FrameContext ctx;
    ctx.cfg = &cfg;
    ctx.cal = &report.calibration;
    ctx.sec = cfg.security;
    ctx.sec.detector_efficiency = cfg.channel.efficiency;
    ctx.sec.electronic_noise =
        cfg.channel.noise_enabled ? report.calibration.v_el_snu() : 0.0;
    ctx.sec.vacuum_units = cfg.channel.noise_enabled ? 1.0 : 0.0;
    ctx.channel = cfg.channel;

    ReceiverOptions ropt = cfg.receiver;
    ropt.noise_floor_snu =
        cfg.channel.noise_enabled ? 1.0 + report.calibration.v_el_snu() : 0.0;
    Receiver receiver(cfg.layout, cfg.ukf, ropt);
    ctx.receiver = &receiver;

    report.frames.resize(cfg.n_frames);
    std::vector<std::uint8_t> ok(cfg.n_frames, 1);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads =
        cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::min(hw, 4u);

    std::atomic<std::uint32_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::uint32_t id = next.fetch_add(1);
            if (id >= cfg.n_frames) break;
            bool good = true;
            report.frames[id] = process_one_frame(ctx, id, &good);
            ok[id] = good ? 1 : 0;
        }
    };
    if (n_threads <= 1 || cfg.n_frames == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    report.sync_failures = 0;
    for (auto v : ok)
        if (!v) ++report.sync_failures;
    report.recompute_aggregates();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!cfg.output_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) throw io_error("run: cannot create output dir " + cfg.output_dir);
        write_frames_csv(cfg.output_dir + "/frames.csv", report.frames);
        write_summary(cfg.output_dir + "/summary.txt", report);
        std::ofstream calf(cfg.output_dir + "/calibration.txt");
        calf << "electronic_variance = " << report.calibration.electronic_variance << "\n"
             << "shot_plus_electronic_variance = "
             << report.calibration.shot_plus_electronic_variance << "\n"
             << "modulation_variance_snu = " << report.calibration.modulation_variance << "\n";
    }
    return report;
}

std::vector<DelaySweepRow> sweep_delay_error(const ExperimentConfig& cfg,
                                             const std::vector<double>& offsets) {
    if (std::find(offsets.begin(), offsets.end(), 0.0) == offsets.end())
        throw invalid_parameter("sweep_delay_error: offsets must include 0");
    std::vector<DelaySweepRow> rows;
    for (double off : offsets) {
        ExperimentConfig c = cfg;
        c.forced_delay_error = static_cast<std::ptrdiff_t>(std::llround(off));
        c.output_dir.clear();  // per-point runs stay in memory
        RunReport r = run(c);
        DelaySweepRow row;
        row.offset_samples = off;
        row.fraction_accepted = r.fraction_accepted;
        // pool over every frame that produced symbols: a forced timing error
        // is expected to blow up the excess noise, which also fails the BER
        // gate, so the accepted-only aggregate would hide the trend
        double eps_sum = 0.0, tau_sum = 0.0;
        std::size_t n = 0;
        for (const auto& f : r.frames) {
            if (f.ber == 1.0 && f.transmittance_hat == 0.0) continue;
            eps_sum += f.excess_noise_pnu;
            tau_sum += f.transmittance_hat;
            ++n;
        }
        row.mean_excess_mpnu = n ? 1e3 * eps_sum / static_cast<double>(n) : 0.0;
        SecurityParams sec = cfg.security;
        sec.detector_efficiency = cfg.channel.efficiency;
        sec.electronic_noise = cfg.channel.noise_enabled ? r.calibration.v_el_snu() : 0.0;
        sec.vacuum_units = cfg.channel.noise_enabled ? 1.0 : 0.0;
        const double tau_mean = n ? tau_sum / static_cast<double>(n) : 0.0;
        const double t_channel = std::clamp(tau_mean / cfg.channel.efficiency, 1e-6, 1.0);
        row.skf = n ? secret_key_fraction(r.calibration.modulation_variance, t_channel,
                                          std::max(row.mean_excess_mpnu * 1e-3, 0.0), sec)
                    : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SkewSweepRow> sweep_skew(const ExperimentConfig& cfg,
                                     const std::vector<double>& skews) {
    std::vector<SkewSweepRow> rows;
    for (double s : skews) {
        SkewSweepRow row;
        row.skew = s;
        for (bool comp : {true, false}) {
            ExperimentConfig c = cfg;
            c.channel.skew = s;
            c.receiver.skew_compensation = comp;
            c.output_dir.clear();
            RunReport r = run(c);
            // average over frames that produced symbols; lost frames carry
            // the ber = 1 / tau = 0 sentinel
            double ber_sum = 0.0;
            std::size_t n = 0;
            for (const auto& f : r.frames) {
                if (f.ber == 1.0 && f.transmittance_hat == 0.0) continue;
                ber_sum += f.ber;
                ++n;
            }
            const double mean_ber = n ? ber_sum / static_cast<double>(n) : 1.0;
            (comp ? row.ber_compensated : row.ber_uncompensated) = mean_ber;
        }
        rows.push_back(row);
    }
    return rows;
}

// ---- persistence ---------------------------------------------------------

namespace {
std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void write_frames_csv(const std::string& path, std::span<const FrameEstimate> rows) {
    std::ofstream f(path);
    if (!f) throw io_error("write_frames_csv: cannot open " + path);
    f << "frame_id,transmittance_hat,excess_noise_mPNU,ber,skf_bits_per_symbol,accepted\n";
    for (const auto& r : rows) {
        f << r.frame_id << ',' << fmt_double(r.transmittance_hat) << ','
          << fmt_double(1e3 * r.excess_noise_pnu) << ',' << fmt_double(r.ber) << ','
          << fmt_double(r.skf) << ',' << (r.accepted ? 1 : 0) << '\n';
    }
    if (!f) throw io_error("write_frames_csv: write failed on " + path);
}

std::vector<FrameEstimate> read_frames_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("read_frames_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw io_error("read_frames_csv: empty file " + path);
    std::vector<FrameEstimate> rows;
    while (std::getline(f, line)) {
        if (trim(line).empty()) continue;
        FrameEstimate r;
        std::stringstream ss(line);
        std::string field;
        auto next_field = [&]() -> std::string {
            if (!std::getline(ss, field, ',')) throw io_error("read_frames_csv: short row");
            return field;
        };
        r.frame_id = static_cast<std::uint32_t>(std::stoul(next_field()));
        r.transmittance_hat = std::stod(next_field());
        r.excess_noise_pnu = 1e-3 * std::stod(next_field());
        r.ber = std::stod(next_field());
        r.skf = std::stod(next_field());
        r.accepted = std::stoi(next_field()) != 0;
        rows.push_back(r);
    }
    return rows;
}

void write_summary(const std::string& path, const RunReport& report) {
    std::ofstream f(path);
    if (!f) throw io_error("write_summary: cannot open " + path);
    f << "# run summary\n";
    f << "frames = " << report.frames.size() << "\n";
    f << "sync_failures = " << report.sync_failures << "\n";
    f << "fraction_accepted = " << fmt_double(report.fraction_accepted) << "\n";
    f << "mean_excess_mpnu = " << fmt_double(report.mean_excess_mpnu) << "\n";
    f << "std_excess_mpnu = " << fmt_double(report.std_excess_mpnu) << "\n";
    f << "mean_skf = " << fmt_double(report.mean_skf) << "\n";
    f << "mean_transmittance = " << fmt_double(report.mean_transmittance) << "\n";
    f << "wall_seconds = " << fmt_double(report.wall_seconds) << "\n";
    f << "modulation_variance_snu = " << fmt_double(report.calibration.modulation_variance)
      << "\n";
    f << "\n# effective configuration\n";
    dump_config(f, report.config);
    if (!f) throw io_error("write_summary: write failed on " + path);
}

bool verify_report_dir(const std::string& dir, std::string* message) {
    const auto rows = read_frames_csv(dir + "/frames.csv");
    RunReport rep;
    rep.frames = rows;
    rep.recompute_aggregates();

    std::ifstream f(dir + "/summary.txt");
    if (!f) throw io_error("verify_report_dir: cannot open summary in " + dir);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto close =
        [&](const char* key, double actual) {
            auto it = kv.find(key);
            if (it == kv.end()) return false;
            const double stored = std::stod(it->second);
            return std::abs(stored - actual) <= 1e-9 * std::max(1.0, std::abs(actual));
        };
    const bool ok = close("mean_excess_mpnu", rep.mean_excess_mpnu) &&
                    close("std_excess_mpnu", rep.std_excess_mpnu) &&
                    close("mean_skf", rep.mean_skf) &&
                    close("fraction_accepted", rep.fraction_accepted);
    if (message) {
        std::ostringstream os;
        os << rows.size() << " frames, mean excess " << rep.mean_excess_mpnu << " mPNU, "
           << "mean skf " << rep.mean_skf << ", accepted " << rep.fraction_accepted
           << (ok ? " [consistent]" : " [MISMATCH with summary]");
        *message = os.str();
    }
    return ok;
}

void emit_plots(const RunReport& report, const std::string& dir) {
    if (report.frames.empty()) throw invalid_parameter("emit_plots: empty report");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("emit_plots: cannot create " + dir);

    {
        std::ofstream f(dir + "/excess_per_frame.dat");
        if (!f) throw io_error("emit_plots: cannot write excess_per_frame.dat");
        f << "# frame_id excess_noise_mpnu\n";
        for (const auto& r : report.frames)
            f << r.frame_id << ' ' << fmt_double(1e3 * r.excess_noise_pnu) << '\n';
    }
    {
        std::ofstream f(dir + "/ber_vs_excess.dat");
        if (!f) throw io_error("emit_plots: cannot write ber_vs_excess.dat");
        f << "# ber excess_noise_mpnu\n";
        for (const auto& r : report.frames)
            f << fmt_double(r.ber) << ' ' << fmt_double(1e3 * r.excess_noise_pnu) << '\n';
    }
    {
        // transmit spectrum snapshot from one frame of the configured layout
        const ExperimentConfig& cfg = report.config;
        QuantumSymbols a = draw_gaussian_symbols(cfg.layout.n_quantum, cfg.mean_photon_number,
                                                 derive_seed(cfg.seed, kStreamSymbols, 0));
        CazacSequence caz = generate_cazac(cfg.layout.n_reference, 7);
        QpskFrame qp = make_qpsk_frame(cfg.layout, 0, derive_seed(cfg.seed, kStreamQpsk, 0));
        ComplexSeries wave =
            build_frame(cfg.layout, a, caz, qp, derive_seed(cfg.seed, kStreamBuild, 0));
        // Welch-style averaged periodogram, 4096-point segments
        const std::size_t nseg = 4096;
        std::vector<double> psd(nseg, 0.0);
        std::size_t count = 0;
        cvec seg(nseg);
        for (std::size_t off = 0; off + nseg <= wave.size(); off += nseg) {
            std::copy(wave.samples.begin() + static_cast<std::ptrdiff_t>(off),
                      wave.samples.begin() + static_cast<std::ptrdiff_t>(off + nseg), seg.begin());
            cvec spec = fft::forward(seg);
            for (std::size_t k = 0; k < nseg; ++k) psd[k] += std::norm(spec[k]);
            ++count;
        }
        std::ofstream f(dir + "/spectrum.dat");
        if (!f) throw io_error("emit_plots: cannot write spectrum.dat");
        f << "# freq_mhz psd_db\n";
        for (std::size_t k = 0; k < nseg / 2; ++k) {
            const double freq = cfg.layout.dac_rate * static_cast<double>(k) / nseg;
            const double p = psd[k] / std::max<std::size_t>(count, 1);
            f << fmt_double(freq / 1e6) << ' ' << fmt_double(10.0 * std::log10(p + 1e-30))
              << '\n';
        }
    }
}

}  // namespace cvqkd
