#pragma once

#include <cstdint>

#include "cvqkd/frame.hpp"
#include "cvqkd/types.hpp"

namespace cvqkd {

/// Free-running heterodyne link model: propagation delay, receiver clock
/// skew, LO beat, combined laser phase noise, loss, detection noise.
struct ChannelConfig {
    double delay = 101.4e-6;        // seconds
    double skew = 1.0;              // receiver clock / transmitter clock
    double lo_offset = 280e6;       // Hz
    double linewidth_sum = 200.0;   // combined Tx + LO linewidth, Hz
    double transmittance = 1.0;     // fiber
    double efficiency = 1.0;        // receiver optics + photodiodes
    double electronic_noise = 0.1;  // SNU per quadrature
    double excess_noise_pnu = 0.0;  // injected channel excess noise
    double adc_rate = 1e9;          // Hz
    double adc_gain = 1.0;          // raw units per sqrt(SNU)
    bool noise_enabled = true;      // test hook: false kills all detection noise
    std::uint64_t seed = 1;

    double tau() const { return transmittance * efficiency; }
    void validate() const;  // throws invalid_config
};

// Laser phase noise: Gaussian random walk with increment variance
// 2*pi*linewidth/rate, starting from a uniform random phase.
std::vector<double> wiener_phase(std::size_t n, double linewidth, double rate,
                                 std::uint64_t seed);

/// Ground truth the simulator can hand to tests.
struct ChannelTruth {
    std::vector<double> phase;   // phase path incl. LO beat, pre-resampling
    std::size_t delay_samples = 0;
};

// Applies, in order: delay (prepended silence that ends up at the vacuum
// noise floor), amplitude scaling by sqrt(T*eta), LO beat + laser phase,
// receiver-clock resampling, then detection noise with per-quadrature
// variance 1 + v_el + tau*excess (SNU) scaled by adc_gain into raw units.
ComplexSeries apply_channel(const ComplexSeries& x, const ChannelConfig& cfg,
                            ChannelTruth* truth = nullptr);

/// Receiver noise calibration: electronic (lasers off), vacuum + electronic
/// (LO on), and the back-to-back modulation variance in SNU.
struct CalibrationRecord {
    double electronic_variance = 0.0;           // raw units^2 per quadrature
    double shot_plus_electronic_variance = 0.0; // raw units^2 per quadrature
    double modulation_variance = 0.0;           // SNU (= 2 nbar for a clean run)

    double snu() const { return shot_plus_electronic_variance - electronic_variance; }
    double v_el_snu() const { return electronic_variance / snu(); }
    void validate() const;  // throws invalid_calibration
};

CalibrationRecord run_calibration(const ChannelConfig& cfg, const FrameLayout& layout,
                                  double nbar, std::uint64_t seed, int b2b_frames = 10,
                                  std::size_t noise_samples = 1000000);

}  // namespace cvqkd
