#pragma once

#include <cstdint>
#include <span>

#include "cvqkd/channel.hpp"
#include "cvqkd/types.hpp"

namespace cvqkd {

/// Security-analysis settings. vacuum_units is 1 for calibrated data and 0
/// in noise-free simulation modes where no shot noise was injected.
struct SecurityParams {
    double beta = 0.95;                // reconciliation efficiency
    double detector_efficiency = 1.0;  // eta, trusted when trusted_receiver
    double electronic_noise = 0.0;     // v_el, SNU per quadrature
    bool trusted_receiver = true;
    double vacuum_units = 1.0;

    void validate() const;
};

// Subtract the mean and rescale so one shot-noise unit equals one variance
// unit per quadrature, using SNU = (vacuum+electronic) - electronic.
ComplexSeries normalize_to_snu(const ComplexSeries& raw, const CalibrationRecord& cal);

struct ChannelEstimate {
    double transmittance = 0.0;      // total tau = T * eta
    double excess_noise_pnu = 0.0;   // thermal mean-photon-number convention
    double residual_variance = 0.0;  // per-quadrature, SNU (diagnostic)
};

// Moment estimator for the heterodyne model b = sqrt(tau/2) a + z with
// per-quadrature Var(z) = vacuum + v_el + tau * eps_snu / 2. alice follows
// the E|a|^2 = 2 nbar amplitude convention; bob must be in SNU.
ChannelEstimate estimate_channel(std::span<const cplx> alice, std::span<const cplx> bob,
                                 double nbar, const SecurityParams& params);

double ber(std::span<const std::uint8_t> bits_rx, std::span<const std::uint8_t> bits_tx);

bool accept_frame(double ber_value, double threshold = 0.1);

// Asymptotic Gaussian-modulation heterodyne secret key fraction under
// collective attacks: beta * I(A:B) - chi(B:E), clipped at zero.
// transmittance is the channel transmission (detector efficiency lives in
// params); excess_noise is in PNU in the convention estimate_channel
// reports (excess variance tau * eps_snu / 2 per quadrature at the output).
double secret_key_fraction(double v_mod_snu, double transmittance, double excess_noise_pnu,
                           const SecurityParams& params);

/// Per-frame results row.
struct FrameEstimate {
    std::uint32_t frame_id = 0;
    double transmittance_hat = 0.0;  // total tau
    double excess_noise_pnu = 0.0;
    double ber = 0.0;
    double skf = 0.0;  // bits per symbol
    bool accepted = false;
};

}  // namespace cvqkd
