#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cladapt/features.hpp"
#include "cladapt/rng.hpp"
#include "cladapt/streams.hpp"

using namespace cladapt;

namespace {

std::vector<double> sinusoid(double freq, double amp, double secs, double rate,
                             double phase = 0.0) {
    const auto n = static_cast<size_t>(std::llround(secs * rate));
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) {
        x[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate + phase);
    }
    return x;
}

double mean_square(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

AlignedWindow window_from_signal(const std::vector<double>& x) {
    AlignedWindow w;
    w.t_close = 2.0;
    w.eeg.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) w.eeg[i].fill(x[i]);
    w.difficulty = 3;
    w.step_elapsed = 30.0;
    w.error_count = 0;
    return w;
}

}  // namespace

TEST_CASE("psd of the zero signal is zero") {
    std::vector<double> x(128, 0.0);
    Psd p = psd(x, 128.0);
    for (double v : p.power) CHECK(v == 0.0);
    CHECK(p.resolution == doctest::Approx(1.0));
}

TEST_CASE("psd input validation") {
    std::vector<double> x(16, 1.0);
    CHECK_THROWS_AS(psd(x, 128.0), Error);
    x.assign(64, 1.0);
    x[5] = std::nan("");
    CHECK_THROWS_AS(psd(x, 128.0), Error);
}

TEST_CASE("10 Hz sinusoid: Parseval and concentration, FFT vs direct DFT") {
    auto x = sinusoid(10.0, 10.0, 1.0, 128.0, 0.7);
    Psd p = psd(x, 128.0);
    Psd oracle = psd_direct(x, 128.0);
    REQUIRE(p.power.size() == oracle.power.size());
    for (size_t k = 0; k < p.power.size(); ++k) {
        CHECK(p.power[k] == doctest::Approx(oracle.power[k]).epsilon(1e-9));
    }
    const double total = p.total_power();
    CHECK(total == doctest::Approx(50.0).epsilon(0.05));
    double near = 0.0;
    for (size_t k = 0; k < p.freqs.size(); ++k) {
        if (p.freqs[k] >= 9.0 && p.freqs[k] <= 11.0) near += p.power[k];
    }
    CHECK(near / total >= 0.95);
}

TEST_CASE("white noise: psd total matches time-domain mean square") {
    Rng rng(3);
    std::vector<double> x(16384);
    for (double& v : x) v = rng.gaussian();
    Psd p = psd(x, 128.0);
    CHECK(p.total_power() == doctest::Approx(mean_square(x)).epsilon(0.05));
}

TEST_CASE("band_power routes sinusoids to their band") {
    BandDefs defs;
    auto x = sinusoid(10.0, 10.0, 1.0, 128.0);
    Psd p = psd(x, 128.0);
    const BandPowers bp = band_powers(p, defs);
    CHECK(bp.alpha == doctest::Approx(50.0).epsilon(0.05));
    CHECK(bp.theta <= 0.01 * bp.alpha);

    auto x5 = sinusoid(5.0, 4.0, 1.0, 128.0);
    Psd p5 = psd(x5, 128.0);
    const BandPowers bp5 = band_powers(p5, defs);
    CHECK(bp5.theta / p5.total_power() >= 0.95);

    std::vector<double> zeros(128, 0.0);
    const BandPowers bz = band_powers(psd(zeros, 128.0), defs);
    CHECK(bz.theta == 0.0);
    CHECK(bz.alpha == 0.0);
    CHECK(bz.beta == 0.0);
    CHECK(bz.gamma == 0.0);
}

TEST_CASE("the 30 Hz boundary bin belongs to beta, not gamma") {
    Psd p;
    p.resolution = 1.0;
    for (int f = 0; f <= 64; ++f) {
        p.freqs.push_back(f);
        p.power.push_back(0.0);
    }
    p.power[30] = 7.0;
    const BandPowers bp = band_powers(p, BandDefs{});
    CHECK(bp.beta == doctest::Approx(7.0));
    CHECK(bp.gamma == 0.0);
}

TEST_CASE("band_power rejects bands outside the spectrum") {
    auto x = sinusoid(10.0, 1.0, 1.0, 128.0);
    Psd p = psd(x, 128.0);
    CHECK_THROWS_AS(band_power(p, Band{10.0, 200.0}), Error);
    CHECK_THROWS_AS(band_power(p, Band{-5.0, 10.0}), Error);
}

TEST_CASE("theta_alpha_ratio arithmetic and clamp") {
    CHECK(theta_alpha_ratio(25.0, 25.0) == doctest::Approx(1.0));
    CHECK(theta_alpha_ratio(50.0, 25.0) == doctest::Approx(2.0));
    const double clamped = theta_alpha_ratio(1.0, 0.0);
    CHECK(clamped == doctest::Approx(1e9));
    CHECK(std::isfinite(clamped));
}

TEST_CASE("spectral entropy endpoints and closed form") {
    Psd p;
    p.resolution = 1.0;
    for (int f = 0; f <= 64; ++f) {
        p.freqs.push_back(f);
        p.power.push_back(0.0);
    }
    // Point mass.
    p.power[10] = 5.0;
    CHECK(spectral_entropy(p) == doctest::Approx(0.0));

    // Uniform over the range.
    int in_range = 0;
    for (size_t k = 0; k < p.freqs.size(); ++k) {
        if (p.freqs[k] >= 4.0 && p.freqs[k] <= 50.0) {
            p.power[k] = 1.0;
            ++in_range;
        } else {
            p.power[k] = 0.0;
        }
    }
    CHECK(spectral_entropy(p) == doctest::Approx(1.0));

    // Two equal bins among N.
    for (double& v : p.power) v = 0.0;
    p.power[10] = 1.0;
    p.power[20] = 1.0;
    CHECK(spectral_entropy(p) ==
          doctest::Approx(std::log(2.0) / std::log(static_cast<double>(in_range))));

    // Zero power: maximal uncertainty.
    for (double& v : p.power) v = 0.0;
    CHECK(spectral_entropy(p) == 1.0);
}

TEST_CASE("behavioral features map the window aggregates") {
    AlignedWindow w;
    w.step_elapsed = 30.0;
    w.difficulty = 1;
    w.error_count = 3;
    auto b = behavioral_features(w, 60.0);
    CHECK(b[0] == 3.0);
    CHECK(b[1] == doctest::Approx(0.5));
    CHECK(b[2] == 0.0);
    w.difficulty = 5;
    CHECK(behavioral_features(w, 60.0)[2] == doctest::Approx(1.0));
    w.step_elapsed = 1000.0;
    CHECK(behavioral_features(w, 60.0)[1] == 4.0);  // clamped
}

TEST_CASE("feature_sequence geometry and shared behavioral columns") {
    auto x = sinusoid(10.0, 10.0, 2.0, 128.0);
    AlignedWindow w = window_from_signal(x);
    w.error_count = 2;
    FeatureSequence seq = feature_sequence(w, FeatureConfig{}, NormStats::identity(), 128.0);
    REQUIRE(seq.frames.size() == 5);
    for (const auto& f : seq.frames) {
        CHECK(f.size() == 8);
        CHECK(f[5] == seq.frames[0][5]);
        CHECK(f[6] == seq.frames[0][6]);
        CHECK(f[7] == seq.frames[0][7]);
    }
    CHECK(seq.frames[0][5] == 2.0);
}

TEST_CASE("stationary sinusoid gives near-identical alpha across sub-frames") {
    auto x = sinusoid(10.0, 10.0, 2.0, 128.0, 1.3);
    AlignedWindow w = window_from_signal(x);
    FeatureSequence seq = feature_sequence(w, FeatureConfig{}, NormStats::identity(), 128.0);
    const double ref = seq.frames[0][1];
    for (const auto& f : seq.frames) {
        CHECK(f[1] == doctest::Approx(ref).epsilon(0.02));
    }
}

TEST_CASE("window matching the normalization mean z-scores to zero") {
    auto x = sinusoid(10.0, 10.0, 2.0, 128.0);
    AlignedWindow w = window_from_signal(x);
    FeatureSequence raw = feature_sequence(w, FeatureConfig{}, NormStats::identity(), 128.0);
    NormStats norms;
    for (int i = 0; i < kFeatureCount; ++i) {
        double m = 0.0;
        for (const auto& f : raw.frames) m += f[i];
        norms.mean[i] = m / static_cast<double>(raw.frames.size());
        norms.stddev[i] = 1.0;
    }
    FeatureSequence z = feature_sequence(w, FeatureConfig{}, norms, 128.0);
    for (const auto& f : z.frames) {
        for (int i = 0; i < 5; ++i) CHECK(std::abs(f[i]) <= 0.25);  // within sub-frame spread
    }
    // Behavioral columns are constant, so they cancel exactly.
    for (const auto& f : z.frames) {
        for (int i = 5; i < 8; ++i) CHECK(f[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("Parseval identity for arbitrary signals") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(256);
        for (double& v : x) v = rng.uniform(-3.0, 3.0);
        Psd p = psd(x, 128.0);
        // The invariant is against the windowed, compensation-scaled input.
        std::vector<double> w(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(x.size())));
        }
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            num += x[i] * w[i] * x[i] * w[i];
            den += w[i] * w[i];
        }
        CHECK(p.total_power() == doctest::Approx(num / den).epsilon(1e-9));
    }
}

TEST_CASE("band partition covers total power exactly") {
    Rng rng(23);
    std::vector<double> x(128);
    for (double& v : x) v = rng.gaussian();
    Psd p = psd(x, 128.0);
    const BandDefs defs;
    const BandPowers bp = band_powers(p, defs);
    double out_of_band = 0.0;
    for (size_t k = 0; k < p.freqs.size(); ++k) {
        const double f = p.freqs[k];
        const bool in_theta = f >= defs.theta.lo && f < defs.theta.hi;
        const bool in_alpha = f >= defs.alpha.lo && f < defs.alpha.hi;
        const bool in_beta = f >= defs.beta.lo && f <= defs.beta.hi;
        const bool in_gamma = f > defs.gamma.lo && f <= defs.gamma.hi;
        CHECK((in_theta + in_alpha + in_beta + in_gamma) <= 1);  // no double counting
        if (!in_theta && !in_alpha && !in_beta && !in_gamma) out_of_band += p.power[k];
    }
    CHECK(bp.theta + bp.alpha + bp.beta + bp.gamma + out_of_band ==
          doctest::Approx(p.total_power()).epsilon(1e-12));
}

TEST_CASE("amplitude scaling: powers scale by c^2, entropy and ratio invariant") {
    Rng rng(31);
    std::vector<double> x(128);
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.gaussian() + 2.0 * std::sin(2.0 * M_PI * 9.0 * static_cast<double>(i) / 128.0);
    }
    const double c = 3.7;
    std::vector<double> xc(x.size());
    for (size_t i = 0; i < x.size(); ++i) xc[i] = c * x[i];

    Psd p1 = psd(x, 128.0);
    Psd p2 = psd(xc, 128.0);
    const BandPowers b1 = band_powers(p1, BandDefs{});
    const BandPowers b2 = band_powers(p2, BandDefs{});
    CHECK(b2.theta == doctest::Approx(c * c * b1.theta).epsilon(1e-9));
    CHECK(b2.alpha == doctest::Approx(c * c * b1.alpha).epsilon(1e-9));
    CHECK(theta_alpha_ratio(b2.theta, b2.alpha) ==
          doctest::Approx(theta_alpha_ratio(b1.theta, b1.alpha)).epsilon(1e-9));
    CHECK(spectral_entropy(p2) == doctest::Approx(spectral_entropy(p1)).epsilon(1e-9));
}

TEST_CASE("entropy stays in [0,1] for random inputs") {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(128);
        for (double& v : x) v = rng.uniform(-5.0, 5.0);
        const double h = spectral_entropy(psd(x, 128.0));
        CHECK(h >= 0.0);
        CHECK(h <= 1.0);
    }
}
