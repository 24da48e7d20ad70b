#include "cvqkd/ukf.hpp"

#include <cmath>

#include "cvqkd/dsp.hpp"

namespace cvqkd {

void UkfConfig::validate() const {
    if (!(process_noise_phase > 0.0) || !(process_noise_freq > 0.0) ||
        !(measurement_noise > 0.0))
        throw invalid_parameter("ukf: noise parameters must be positive");
    if (!(sigma_point_spread > 0.0))
        throw invalid_parameter("ukf: sigma point spread must be positive");
}

std::vector<double> ukf_track_phase(const ComplexSeries& pilot, const UkfConfig& cfg) {
    cfg.validate();
    const auto& z = pilot.samples;
    const std::size_t n = z.size();
    if (n < 2) throw invalid_parameter("ukf_track_phase: series too short");

    double amp = cfg.amplitude;
    if (amp <= 0.0) {
        const double p = mean_power(z);
        amp = std::sqrt(std::max(p - 2.0 * cfg.measurement_noise, 0.01 * p));
    }

    // unscented weights for the 2-state system (kappa = 3 - n = 1)
    const double alpha = cfg.sigma_point_spread;
    const double kappa = 1.0;
    const double lambda = alpha * alpha * (2.0 + kappa) - 2.0;
    const double gamma = std::sqrt(2.0 + lambda);
    const double wm0 = lambda / (2.0 + lambda);
    const double wc0 = wm0 + (1.0 - alpha * alpha + 2.0);
    const double wi = 1.0 / (2.0 * (2.0 + lambda));

    const double r = cfg.measurement_noise;
    const double q_ph = cfg.process_noise_phase;
    const double q_fr = cfg.process_noise_freq;

    // state [theta, omega], covariance P (symmetric 2x2)
    double th = std::atan2(z[0].imag(), z[0].real());
    double om = 0.0;
    double p00 = 1.0, p01 = 0.0, p11 = 1e-9;

    std::vector<double> out(n);
    std::size_t exceed = 0;

    for (std::size_t i = 0; i < n; ++i) {
        // linear predict: theta += omega
        th += om;
        const double a00 = p00 + 2.0 * p01 + p11 + q_ph;
        const double a01 = p01 + p11;
        const double a11 = p11 + q_fr;
        p00 = a00; p01 = a01; p11 = a11;

        // sigma points through the measurement h(x) = amp [cos th, sin th].
        // Lower Cholesky of P: only the first column moves theta.
        const double l11 = std::sqrt(std::max(p00, 1e-30));
        const double l21 = p01 / l11;
        const double dth = gamma * l11;

        const double c0 = std::cos(th), s0 = std::sin(th);
        const double cd = std::cos(dth), sd = std::sin(dth);
        // Distinct measurement predictions: theta and theta +/- dth; the two
        // omega-direction points keep theta (second Cholesky column has no
        // phase component), so they reuse the center prediction.
        const double cp = c0 * cd - s0 * sd, sp = s0 * cd + c0 * sd;
        const double cm = c0 * cd + s0 * sd, sm = s0 * cd - c0 * sd;

        const double zx = (wm0 + 2.0 * wi) * amp * c0 + wi * amp * (cp + cm);
        const double zy = (wm0 + 2.0 * wi) * amp * s0 + wi * amp * (sp + sm);

        // innovation covariance S and cross covariance C; the omega points
        // share the center deviation (weight 2*wi) and their cross terms
        // cancel in pairs
        double sxx = r, syy = r, sxy = 0.0;
        double cx0 = 0.0, cy0 = 0.0, cx1 = 0.0, cy1 = 0.0;
        {
            const double dx = amp * c0 - zx, dy = amp * s0 - zy;
            const double w = wc0 + 2.0 * wi;
            sxx += w * dx * dx; syy += w * dy * dy; sxy += w * dx * dy;
        }
        {
            const double dx = amp * cp - zx, dy = amp * sp - zy;
            sxx += wi * dx * dx; syy += wi * dy * dy; sxy += wi * dx * dy;
            cx0 += wi * (gamma * l11) * dx; cy0 += wi * (gamma * l11) * dy;
            cx1 += wi * (gamma * l21) * dx; cy1 += wi * (gamma * l21) * dy;
        }
        {
            const double dx = amp * cm - zx, dy = amp * sm - zy;
            sxx += wi * dx * dx; syy += wi * dy * dy; sxy += wi * dx * dy;
            cx0 += wi * (-gamma * l11) * dx; cy0 += wi * (-gamma * l11) * dy;
            cx1 += wi * (-gamma * l21) * dx; cy1 += wi * (-gamma * l21) * dy;
        }

        const double det = sxx * syy - sxy * sxy;
        const double ix = (z[i].real() - zx), iy = (z[i].imag() - zy);
        const double inv00 = syy / det, inv11 = sxx / det, inv01 = -sxy / det;

        const double nis = ix * (inv00 * ix + inv01 * iy) + iy * (inv01 * ix + inv11 * iy);
        if (nis > cfg.divergence_nis) ++exceed;

        // K = C S^-1
        const double k00 = cx0 * inv00 + cy0 * inv01;
        const double k01 = cx0 * inv01 + cy0 * inv11;
        const double k10 = cx1 * inv00 + cy1 * inv01;
        const double k11 = cx1 * inv01 + cy1 * inv11;

        th += k00 * ix + k01 * iy;
        om += k10 * ix + k11 * iy;

        // P -= K S K^T
        const double t00 = k00 * sxx + k01 * sxy, t01 = k00 * sxy + k01 * syy;
        const double u00 = k10 * sxx + k11 * sxy, u01 = k10 * sxy + k11 * syy;
        p00 -= t00 * k00 + t01 * k01;
        p01 -= t00 * k10 + t01 * k11;
        p11 -= u00 * k10 + u01 * k11;
        p00 = std::max(p00, 1e-18);
        p11 = std::max(p11, 1e-20);

        out[i] = th;
    }

    if (static_cast<double>(exceed) > cfg.divergence_fraction * static_cast<double>(n))
        throw tracker_divergence("ukf_track_phase: innovation bound exceeded");
    return out;
}

}  // namespace cvqkd
