#include "cvqkd/estimation.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace cvqkd {

void SecurityParams::validate() const {
    if (!(beta > 0.0) || beta > 1.0) throw invalid_parameter("security: beta outside (0, 1]");
    if (!(detector_efficiency > 0.0) || detector_efficiency > 1.0)
        throw invalid_parameter("security: detector efficiency outside (0, 1]");
    if (electronic_noise < 0.0) throw invalid_parameter("security: negative electronic noise");
    if (vacuum_units < 0.0) throw invalid_parameter("security: negative vacuum units");
}

ComplexSeries normalize_to_snu(const ComplexSeries& raw, const CalibrationRecord& cal) {
    cal.validate();
    const double snu = cal.snu();
    ComplexSeries out;
    out.sample_rate = raw.sample_rate;
    out.samples.resize(raw.size());
    cplx mean(0.0, 0.0);
    for (const auto& v : raw.samples) mean += v;
    mean /= static_cast<double>(std::max<std::size_t>(raw.size(), 1));
    const double scale = 1.0 / std::sqrt(snu);
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.samples[i] = (raw.samples[i] - mean) * scale;
    return out;
}

ChannelEstimate estimate_channel(std::span<const cplx> alice, std::span<const cplx> bob,
                                 double nbar, const SecurityParams& params) {
    params.validate();
    if (alice.size() != bob.size()) throw length_mismatch("estimate_channel: length mismatch");
    const std::size_t n = alice.size();
    if (n == 0) throw invalid_parameter("estimate_channel: empty input");
    (void)nbar;  // declared modulation strength; estimation is moment-based

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (std::conj(alice[i]) * bob[i]).real();
        den += std::norm(alice[i]);
    }
    if (den < 1e-12) throw degenerate_input("estimate_channel: vanishing modulation");

    const double gain = num / den;  // estimates sqrt(tau/2)
    cplx rmean(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) rmean += bob[i] - gain * alice[i];
    rmean /= static_cast<double>(n);
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) resid += std::norm(bob[i] - gain * alice[i] - rmean);
    resid /= static_cast<double>(2 * n);  // per quadrature

    ChannelEstimate est;
    est.transmittance = 2.0 * gain * gain;
    est.residual_variance = resid;
    const double floor = params.vacuum_units + params.electronic_noise;
    const double eps_snu = (resid - floor) * 2.0 / std::max(est.transmittance, 1e-12);
    est.excess_noise_pnu = 0.5 * eps_snu;
    return est;
}

double ber(std::span<const std::uint8_t> bits_rx, std::span<const std::uint8_t> bits_tx) {
    if (bits_rx.size() != bits_tx.size() || bits_rx.empty())
        throw length_mismatch("ber: sequences differ in length");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < bits_rx.size(); ++i)
        errors += (bits_rx[i] != bits_tx[i]) ? 1 : 0;
    return static_cast<double>(errors) / static_cast<double>(bits_rx.size());
}

bool accept_frame(double ber_value, double threshold) {
    if (!(threshold > 0.0) || threshold >= 0.5)
        throw invalid_parameter("accept_frame: threshold outside (0, 0.5)");
    return ber_value <= threshold;
}

// ---- Gaussian entanglement-based security machinery --------------------

namespace {

double g_entropy(double nu) {
    if (nu <= 1.0 + 1e-12) return 0.0;
    const double a = 0.5 * (nu + 1.0), b = 0.5 * (nu - 1.0);
    return a * std::log2(a) - b * std::log2(b);
}

// symplectic eigenvalues of a 2n x 2n covariance matrix via eig(i Omega G)
std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& G) {
    const long n2 = G.rows();
    Eigen::MatrixXd Om = Eigen::MatrixXd::Zero(n2, n2);
    for (long i = 0; i < n2 / 2; ++i) {
        Om(2 * i, 2 * i + 1) = 1.0;
        Om(2 * i + 1, 2 * i) = -1.0;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(Om * G, false);
    std::vector<double> mags(static_cast<std::size_t>(n2));
    for (long i = 0; i < n2; ++i) mags[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()[i].imag());
    std::sort(mags.begin(), mags.end());
    std::vector<double> out;
    for (long i = 0; i < n2; i += 2) out.push_back(mags[static_cast<std::size_t>(i)]);
    return out;
}

double entropy_sum(const Eigen::MatrixXd& G) {
    double s = 0.0;
    for (double nu : symplectic_eigenvalues(G)) s += g_entropy(nu);
    return s;
}

}  // namespace

double secret_key_fraction(double v_mod_snu, double transmittance, double excess_noise_pnu,
                           const SecurityParams& params) {
    params.validate();
    if (!(v_mod_snu > 0.0)) throw invalid_parameter("secret_key_fraction: V_mod <= 0");
    if (!(transmittance > 0.0) || transmittance > 1.0)
        throw invalid_parameter("secret_key_fraction: transmittance outside (0, 1]");
    if (excess_noise_pnu < 0.0) throw invalid_parameter("secret_key_fraction: negative excess noise");

    const double T = transmittance;
    const double eta = params.detector_efficiency;
    const double vel = params.electronic_noise;
    const double tau = T * eta;
    const double eps = 2.0 * excess_noise_pnu;  // SNU, estimator referral
    const double V = v_mod_snu + 1.0;

    // mutual information from the measured heterodyne SNR
    const double snr = 0.5 * tau * v_mod_snu / (1.0 + vel + 0.5 * tau * eps);
    const double iab = std::log2(1.0 + snr);

    const Eigen::Matrix2d I2 = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d SZ;
    SZ << 1.0, 0.0, 0.0, -1.0;

    double chi = 0.0;
    if (params.trusted_receiver) {
        const double a = V;
        const double b = T * V + 1.0 - T + T * eps;
        const double c = std::sqrt(T * (V * V - 1.0));
        Eigen::MatrixXd gAB(4, 4);
        gAB.setZero();
        gAB.block<2, 2>(0, 0) = a * I2;
        gAB.block<2, 2>(2, 2) = b * I2;
        gAB.block<2, 2>(0, 2) = c * SZ;
        gAB.block<2, 2>(2, 0) = c * SZ;
        const double s_e = entropy_sum(gAB);

        // trusted detector: beamsplitter eta with one arm of an EPR pair of
        // variance vN absorbing the electronic noise, then ideal heterodyne
        const double vN = (eta < 1.0) ? 1.0 + 2.0 * vel / (1.0 - eta) : 1.0;
        const double cN = std::sqrt(std::max(vN * vN - 1.0, 0.0));
        Eigen::MatrixXd g(8, 8);  // modes A, B1, F0, G
        g.setZero();
        g.block<2, 2>(0, 0) = a * I2;
        g.block<2, 2>(2, 2) = b * I2;
        g.block<2, 2>(0, 2) = c * SZ;
        g.block<2, 2>(2, 0) = c * SZ;
        g.block<2, 2>(4, 4) = vN * I2;
        g.block<2, 2>(6, 6) = vN * I2;
        g.block<2, 2>(4, 6) = cN * SZ;
        g.block<2, 2>(6, 4) = cN * SZ;

        Eigen::MatrixXd S = Eigen::MatrixXd::Identity(8, 8);
        const double se = std::sqrt(eta), sr = std::sqrt(1.0 - eta);
        S.block<2, 2>(2, 2) = se * I2;
        S.block<2, 2>(2, 4) = sr * I2;
        S.block<2, 2>(4, 2) = -sr * I2;
        S.block<2, 2>(4, 4) = se * I2;
        g = S * g * S.transpose();

        // heterodyne measurement of B2 (rows/cols 2..3)
        Eigen::MatrixXd gB = g.block<2, 2>(2, 2) + I2;
        Eigen::MatrixXd gR(6, 6), gC(6, 2);
        const int keep[6] = {0, 1, 4, 5, 6, 7};
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) gR(i, j) = g(keep[i], keep[j]);
            for (int j = 0; j < 2; ++j) gC(i, j) = g(keep[i], 2 + j);
        }
        Eigen::MatrixXd gcond = gR - gC * gB.inverse() * gC.transpose();
        chi = s_e - entropy_sum(gcond);
    } else {
        // receiver imperfections handed to the eavesdropper
        const double a = V;
        const double b2 = tau * V + 1.0 - tau + tau * eps + 2.0 * vel;
        const double c2 = std::sqrt(tau * (V * V - 1.0));
        Eigen::MatrixXd gAB(4, 4);
        gAB.setZero();
        gAB.block<2, 2>(0, 0) = a * I2;
        gAB.block<2, 2>(2, 2) = b2 * I2;
        gAB.block<2, 2>(0, 2) = c2 * SZ;
        gAB.block<2, 2>(2, 0) = c2 * SZ;
        const double s_e = entropy_sum(gAB);
        const double a_cond = a - c2 * c2 / (b2 + 1.0);
        chi = s_e - g_entropy(a_cond);
    }

    return std::max(0.0, params.beta * iab - chi);
}

}  // namespace cvqkd
