#pragma once

#include "cvqkd/types.hpp"

namespace cvqkd {

/// Unscented Kalman filter settings for pilot phase tracking. State is
/// [phase, frequency residual] as a double random walk; the measurement is
/// the complex pilot sample, nonlinear in the phase.
struct UkfConfig {
    double process_noise_phase = 1.3e-6;  // rad^2 per step
    double process_noise_freq = 1e-12;    // (rad/step)^2
    double measurement_noise = 5e-3;      // per-quadrature variance of the filtered pilot
    double sigma_point_spread = 0.5;      // unscented alpha
    double divergence_nis = 13.8;         // chi-square(2) bound on the innovation
    double divergence_fraction = 0.01;    // error if exceeded more often than this
    double amplitude = 0.0;               // pilot amplitude; 0 = estimate from the data

    void validate() const;
};

// Per-sample unwrapped phase estimate of a noisy complex exponential.
// Throws tracker_divergence when the normalized innovation exceeds the
// configured bound for more than the configured fraction of samples.
std::vector<double> ukf_track_phase(const ComplexSeries& pilot, const UkfConfig& cfg);

}  // namespace cvqkd
