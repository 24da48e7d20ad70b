#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cvqkd/channel.hpp"
#include "cvqkd/estimation.hpp"
#include "cvqkd/frame.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/ukf.hpp"

namespace cvqkd {

enum class ClockMode { SharedClock, FreeRunning };

/// One batch experiment: layout, impairments, tracker settings, security
/// assumptions, and the run bookkeeping.
struct ExperimentConfig {
    FrameLayout layout;
    ChannelConfig channel;
    UkfConfig ukf;
    SecurityParams security;
    ReceiverOptions receiver;

    std::size_t n_frames = 100;
    std::uint64_t seed = 1;
    ClockMode mode = ClockMode::FreeRunning;
    double mean_photon_number = 1.45;
    double ber_threshold = 0.1;
    int calibration_frames = 10;
    std::ptrdiff_t forced_delay_error = 0;  // samples
    int threads = 0;                        // 0 = hardware concurrency
    std::string output_dir = "out";

    void validate() const;
};

// Line-oriented "section.key = value" configuration. '#' starts a comment;
// keys not recognized raise invalid_config. parse_config applies the file
// on top of the defaults.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);
void dump_config(std::ostream& out, const ExperimentConfig& cfg);

/// Batch result: per-frame rows plus aggregates over the accepted frames.
struct RunReport {
    std::vector<FrameEstimate> frames;
    std::size_t sync_failures = 0;
    double mean_excess_mpnu = 0.0;
    double std_excess_mpnu = 0.0;
    double mean_skf = 0.0;
    double mean_transmittance = 0.0;
    double fraction_accepted = 0.0;
    double wall_seconds = 0.0;
    CalibrationRecord calibration{};
    ExperimentConfig config{};

    void recompute_aggregates();
};

// Calibrates, runs n_frames end to end, writes frames.csv / summary.txt /
// calibration.txt under output_dir (unless it is empty). Single-frame sync
// failures are recorded, never fatal.
RunReport run(const ExperimentConfig& cfg);

struct DelaySweepRow {
    double offset_samples = 0.0;
    double mean_excess_mpnu = 0.0;
    double skf = 0.0;
    double fraction_accepted = 0.0;
};
// Forced post-sync timing error sweep; offsets must include 0. Frame seeds
// are shared across offsets so the trend is paired.
std::vector<DelaySweepRow> sweep_delay_error(const ExperimentConfig& cfg,
                                             const std::vector<double>& offsets);

struct SkewSweepRow {
    double skew = 0.0;
    double ber_compensated = 0.0;
    double ber_uncompensated = 0.0;
};
std::vector<SkewSweepRow> sweep_skew(const ExperimentConfig& cfg,
                                     const std::vector<double>& skews);

// Plot-ready two-column files: excess noise per frame, BER vs excess noise,
// and a transmit-spectrum snapshot. Throws invalid_parameter on an empty
// report and io_error if the directory is not writable.
void emit_plots(const RunReport& report, const std::string& dir);

void write_frames_csv(const std::string& path, std::span<const FrameEstimate> rows);
std::vector<FrameEstimate> read_frames_csv(const std::string& path);
void write_summary(const std::string& path, const RunReport& report);

// Consistency check used by the `report` subcommand: recompute aggregates
// from the CSV and compare with the summary.
bool verify_report_dir(const std::string& dir, std::string* message = nullptr);

}  // namespace cvqkd
