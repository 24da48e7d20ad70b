#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cvqkd {

// splitmix64 step; used to derive independent stream seeds from
// (master seed, frame id, stream tag) so frames can run in any order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= b + 0xd1b54a32d192ed03ULL;
    h ^= splitmix64(s);
    return h ? h : 0x2545f4914f6cdd1dULL;
}

// Gaussian sampler on top of mt19937_64 via Box-Muller. The standard fully
// specifies mt19937_64 output, so this is bit-reproducible across platforms
// (std::normal_distribution is not).
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : gen_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // one draw of circularly symmetric complex noise with unit variance
    // per quadrature
    std::complex<double> complex_unit() {
        double re = (*this)();
        double im = (*this)();
        return {re, im};
    }

    double uniform01() {
        // in (0, 1]; never 0 so log() is safe
        return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cvqkd
