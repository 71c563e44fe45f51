#pragma once

#include <array>
#include <span>
#include <vector>

#include "cladapt/errors.hpp"
#include "cladapt/streams.hpp"

namespace cladapt {

inline constexpr int kFeatureCount = 8;
inline constexpr double kRatioEpsilon = 1e-9;   // microvolts^2 division guard
inline constexpr double kStdFloor = 1e-6;

// EEG band table. theta/alpha are [lo, hi); beta is [lo, hi] (it owns the
// shared 30 Hz boundary); gamma is (lo, hi].
struct Band {
    double lo = 0.0;
    double hi = 0.0;
};

struct BandDefs {
    Band theta{4.0, 7.0};
    Band alpha{8.0, 13.0};
    Band beta{14.0, 30.0};
    Band gamma{30.0, 50.0};

    void validate() const;
};

// One-sided power spectral density. Parseval-normalized: the bins sum to the
// mean square of the raw input (after Hann window power compensation).
struct Psd {
    std::vector<double> freqs;   // Hz
    std::vector<double> power;   // microvolts^2 per bin
    double resolution = 0.0;     // Hz per bin

    double total_power() const;
};

// Hann-windowed periodogram. Throws Error("too_short") for fewer than 32
// samples and Error("non_finite") for NaN/inf input.
Psd psd(std::span<const double> samples, double sample_rate);

// Reference O(n^2) DFT periodogram with the same windowing and scaling.
// Kept separate from the FFT path so tests can cross-check one against the
// other.
Psd psd_direct(std::span<const double> samples, double sample_rate);

enum class BandEdges { half_open, closed, open_lo_closed_hi };

// Sum of PSD bins inside [lo, hi) by default. Throws Error("bad_band") when
// the band leaves [0, nyquist].
double band_power(const Psd& p, Band band, BandEdges edges = BandEdges::half_open);

struct BandPowers {
    double theta = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

// All four bands with their edge conventions applied.
BandPowers band_powers(const Psd& p, const BandDefs& defs);

double theta_alpha_ratio(double theta_power, double alpha_power);

// Normalized Shannon entropy of the power distribution over bins with
// lo <= f <= hi. 0 for a point mass, 1 for uniform (and for zero power).
// Throws Error("too_few_bins") when fewer than 2 bins fall in range.
double spectral_entropy(const Psd& p, double f_lo = 4.0, double f_hi = 50.0);

// Fixed model input order.
struct FeatureFrame {
    double theta_p = 0.0;
    double alpha_p = 0.0;
    double beta_p = 0.0;
    double ta_ratio = 0.0;
    double spec_entropy = 0.0;
    double error_count = 0.0;
    double step_time_norm = 0.0;
    double difficulty_norm = 0.0;

    std::array<double, kFeatureCount> as_array() const {
        return {theta_p, alpha_p,     beta_p,         ta_ratio,
                spec_entropy, error_count, step_time_norm, difficulty_norm};
    }
};

// The model's input: one row per sub-frame, 8 features per row.
struct FeatureSequence {
    std::vector<std::array<double, kFeatureCount>> frames;
    double t_close = 0.0;
};

// Per-feature z-scoring statistics.
struct NormStats {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> stddev{};

    static NormStats identity();
    double z(int feature, double value) const;
};

struct FeatureConfig {
    BandDefs bands;
    double entropy_lo = 4.0;
    double entropy_hi = 50.0;
    double subframe_len = 1.0;       // seconds
    double hop = 0.25;               // seconds
    double expected_step_secs = 60.0;

    void validate() const;
};

// Per-channel band powers (averaged over sub-frames), kept for session logs.
// Gamma is computed and logged but excluded from the model input.
struct FeatureDiagnostics {
    std::array<double, kChannelCount> theta{};
    std::array<double, kChannelCount> alpha{};
    std::array<double, kChannelCount> beta{};
    std::array<double, kChannelCount> gamma{};
};

std::array<double, 3> behavioral_features(const AlignedWindow& w, double expected_step_secs);

// Cuts the window into sub-frames, computes per-sub-frame spectral features
// over the channel-averaged PSD, appends the behavioral triplet to every
// frame, and z-scores everything with `norms`.
FeatureSequence feature_sequence(const AlignedWindow& w, const FeatureConfig& cfg,
                                 const NormStats& norms, double sample_rate,
                                 FeatureDiagnostics* diagnostics = nullptr);

}  // namespace cladapt
