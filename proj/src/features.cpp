#include "cladapt/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace cladapt {

namespace {

constexpr double kFreqEps = 1e-9;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place.
void fft_pow2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<double> hann_window(size_t n) {
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i) {
        // Periodic Hann.
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)));
    }
    return w;
}

Psd periodogram_from_spectrum(const std::vector<std::complex<double>>& spec, size_t n,
                              double sample_rate, double window_power_sum) {
    Psd out;
    out.resolution = sample_rate / static_cast<double>(n);
    const size_t bins = n / 2 + 1;
    out.freqs.resize(bins);
    out.power.resize(bins);
    const double scale = 1.0 / (static_cast<double>(n) * window_power_sum);
    for (size_t k = 0; k < bins; ++k) {
        out.freqs[k] = static_cast<double>(k) * out.resolution;
        double p = std::norm(spec[k]) * scale;
        const bool one_sided_double = k != 0 && !(n % 2 == 0 && k == n / 2);
        if (one_sided_double) p *= 2.0;
        out.power[k] = p;
    }
    return out;
}

void check_input(std::span<const double> samples) {
    if (samples.size() < 32) {
        throw Error("too_short", "psd needs at least 32 samples");
    }
    for (double v : samples) {
        if (!std::isfinite(v)) throw Error("non_finite", "psd input contains NaN/inf");
    }
}

}  // namespace

void BandDefs::validate() const {
    const Band bands[] = {theta, alpha, beta, gamma};
    for (const Band& b : bands) {
        if (!(b.lo < b.hi) || b.lo < 0.0) {
            throw Error("bad_band", "each band needs 0 <= lo < hi");
        }
    }
    // Ordered, non-overlapping; beta and gamma may share the 30 Hz boundary
    // (that bin is assigned to beta).
    if (theta.hi > alpha.lo + kFreqEps || alpha.hi > beta.lo + kFreqEps ||
        beta.hi > gamma.lo + kFreqEps) {
        throw Error("bad_band", "bands must be ordered and non-overlapping");
    }
}

double Psd::total_power() const {
    return std::accumulate(power.begin(), power.end(), 0.0);
}

Psd psd(std::span<const double> samples, double sample_rate) {
    check_input(samples);
    const size_t n = samples.size();
    const auto w = hann_window(n);
    double w2 = 0.0;
    for (double v : w) w2 += v * v;

    std::vector<std::complex<double>> spec(n);
    for (size_t i = 0; i < n; ++i) spec[i] = samples[i] * w[i];
    if (is_pow2(n)) {
        fft_pow2(spec);
    } else {
        // Direct DFT fallback for awkward lengths.
        std::vector<std::complex<double>> in = spec;
        for (size_t k = 0; k < n; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (size_t i = 0; i < n; ++i) {
                const double ang = -2.0 * M_PI * static_cast<double>(k * i % n) / static_cast<double>(n);
                acc += in[i] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            spec[k] = acc;
        }
    }
    return periodogram_from_spectrum(spec, n, sample_rate, w2);
}

Psd psd_direct(std::span<const double> samples, double sample_rate) {
    check_input(samples);
    const size_t n = samples.size();
    const auto w = hann_window(n);
    double w2 = 0.0;
    for (double v : w) w2 += v * v;

    std::vector<std::complex<double>> spec(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double ang =
                -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) / static_cast<double>(n);
            acc += samples[i] * w[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        spec[k] = acc;
    }
    return periodogram_from_spectrum(spec, n, sample_rate, w2);
}

double band_power(const Psd& p, Band band, BandEdges edges) {
    if (p.freqs.empty()) throw Error("bad_band", "empty psd");
    const double nyquist = p.freqs.back();
    if (band.lo < -kFreqEps || band.hi > nyquist + kFreqEps || !(band.lo < band.hi)) {
        throw Error("bad_band", "band outside [0, nyquist]");
    }
    double sum = 0.0;
    for (size_t k = 0; k < p.freqs.size(); ++k) {
        const double f = p.freqs[k];
        bool in = false;
        switch (edges) {
            case BandEdges::half_open:
                in = f >= band.lo - kFreqEps && f < band.hi - kFreqEps;
                break;
            case BandEdges::closed:
                in = f >= band.lo - kFreqEps && f <= band.hi + kFreqEps;
                break;
            case BandEdges::open_lo_closed_hi:
                in = f > band.lo + kFreqEps && f <= band.hi + kFreqEps;
                break;
        }
        if (in) sum += p.power[k];
    }
    return sum;
}

BandPowers band_powers(const Psd& p, const BandDefs& defs) {
    BandPowers out;
    out.theta = band_power(p, defs.theta, BandEdges::half_open);
    out.alpha = band_power(p, defs.alpha, BandEdges::half_open);
    out.beta = band_power(p, defs.beta, BandEdges::closed);           // owns 30 Hz
    out.gamma = band_power(p, defs.gamma, BandEdges::open_lo_closed_hi);
    return out;
}

double theta_alpha_ratio(double theta_power, double alpha_power) {
    return theta_power / std::max(alpha_power, kRatioEpsilon);
}

double spectral_entropy(const Psd& p, double f_lo, double f_hi) {
    double total = 0.0;
    int count = 0;
    for (size_t k = 0; k < p.freqs.size(); ++k) {
        if (p.freqs[k] >= f_lo - kFreqEps && p.freqs[k] <= f_hi + kFreqEps) {
            total += p.power[k];
            ++count;
        }
    }
    if (count < 2) throw Error("too_few_bins", "entropy range must cover at least 2 bins");
    if (total <= 0.0) return 1.0;  // zero power: maximal uncertainty

    double h = 0.0;
    for (size_t k = 0; k < p.freqs.size(); ++k) {
        if (p.freqs[k] < f_lo - kFreqEps || p.freqs[k] > f_hi + kFreqEps) continue;
        const double q = p.power[k] / total;
        if (q > 0.0) h -= q * std::log(q);
    }
    h /= std::log(static_cast<double>(count));
    return std::clamp(h, 0.0, 1.0);
}

NormStats NormStats::identity() {
    NormStats n;
    n.mean.fill(0.0);
    n.stddev.fill(1.0);
    return n;
}

double NormStats::z(int feature, double value) const {
    return (value - mean[feature]) / std::max(stddev[feature], kStdFloor);
}

void FeatureConfig::validate() const {
    bands.validate();
    if (subframe_len <= 0.0 || hop <= 0.0 || expected_step_secs <= 0.0 ||
        !(entropy_lo < entropy_hi)) {
        throw Error("bad_config_value", "feature config values must be positive");
    }
}

std::array<double, 3> behavioral_features(const AlignedWindow& w, double expected_step_secs) {
    const double step_time_norm = std::clamp(w.step_elapsed / expected_step_secs, 0.0, 4.0);
    const double difficulty_norm = (static_cast<double>(w.difficulty) - 1.0) / 4.0;
    return {static_cast<double>(w.error_count), step_time_norm, difficulty_norm};
}

FeatureSequence feature_sequence(const AlignedWindow& w, const FeatureConfig& cfg,
                                 const NormStats& norms, double sample_rate,
                                 FeatureDiagnostics* diagnostics) {
    cfg.validate();
    const size_t rows = w.eeg.size();
    const auto sub_len = static_cast<size_t>(std::llround(cfg.subframe_len * sample_rate));
    const auto hop = static_cast<size_t>(std::llround(cfg.hop * sample_rate));
    if (sub_len < 32 || hop == 0 || sub_len > rows) {
        throw Error("bad_config_value", "sub-frame does not fit the window");
    }
    const size_t n_frames = (rows - sub_len) / hop + 1;
    const auto behav = behavioral_features(w, cfg.expected_step_secs);

    FeatureSequence seq;
    seq.t_close = w.t_close;
    seq.frames.reserve(n_frames);

    FeatureDiagnostics diag;
    std::vector<double> channel_slice(sub_len);
    for (size_t f = 0; f < n_frames; ++f) {
        const size_t start = f * hop;
        Psd mean_psd;
        for (int c = 0; c < kChannelCount; ++c) {
            for (size_t i = 0; i < sub_len; ++i) channel_slice[i] = w.eeg[start + i][c];
            Psd p = psd(channel_slice, sample_rate);
            if (diagnostics) {
                const BandPowers bp = band_powers(p, cfg.bands);
                diag.theta[c] += bp.theta / static_cast<double>(n_frames);
                diag.alpha[c] += bp.alpha / static_cast<double>(n_frames);
                diag.beta[c] += bp.beta / static_cast<double>(n_frames);
                diag.gamma[c] += bp.gamma / static_cast<double>(n_frames);
            }
            if (c == 0) {
                mean_psd = std::move(p);
            } else {
                for (size_t k = 0; k < mean_psd.power.size(); ++k) mean_psd.power[k] += p.power[k];
            }
        }
        for (double& v : mean_psd.power) v /= static_cast<double>(kChannelCount);

        const BandPowers bp = band_powers(mean_psd, cfg.bands);
        FeatureFrame fr;
        fr.theta_p = bp.theta;
        fr.alpha_p = bp.alpha;
        fr.beta_p = bp.beta;
        fr.ta_ratio = theta_alpha_ratio(bp.theta, bp.alpha);
        fr.spec_entropy = spectral_entropy(mean_psd, cfg.entropy_lo, cfg.entropy_hi);
        fr.error_count = behav[0];
        fr.step_time_norm = behav[1];
        fr.difficulty_norm = behav[2];

        auto raw = fr.as_array();
        std::array<double, kFeatureCount> z{};
        for (int i = 0; i < kFeatureCount; ++i) z[i] = norms.z(i, raw[i]);
        seq.frames.push_back(z);
    }
    if (diagnostics) *diagnostics = diag;
    return seq;
}

}  // namespace cladapt
