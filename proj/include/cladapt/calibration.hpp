#pragma once

#include <cstdint>
#include <vector>

#include "cladapt/core_types.hpp"
#include "cladapt/features.hpp"
#include "cladapt/lstm.hpp"
#include "cladapt/streams.hpp"
#include "cladapt/synthgen.hpp"

namespace cladapt {
namespace calibration {

// Protocol durations. The paper's protocol induces only low and high states;
// optimal-class training windows come from an extra simulator phase at
// mid-range latent load. `window_cadence` is the close interval during
// calibration; keeping it equal to the live cadence keeps the behavioral
// feature spans identical between calibration and deployment.
struct CalibrationPlan {
    double rest_secs = 60.0;
    double oneback_secs = 120.0;
    double threeback_secs = 120.0;
    double optimal_secs = 120.0;
    double window_cadence = 10.0;

    void validate() const;
};

enum class Phase { rest, oneback, threeback, synthetic_optimal };

std::string to_string(Phase p);
LoadState phase_label(Phase p);

// Windows of one phase; feature sequences are raw (not yet z-scored) until
// normalization is applied.
struct LabeledSegment {
    Phase phase = Phase::rest;
    LoadState label = LoadState::low;
    std::vector<FeatureSequence> windows;
};

// Enumerates window close times for a phase: the first close as soon as one
// full window exists, then every cadence. floor((secs - window) / cadence) + 1
// closes.
std::vector<double> window_close_times(double phase_secs, double window_len, double cadence);

// Runs the n-back phases (plus the synthetic optimal phase) against the
// simulated subject and windows the streams. All phases run at the given
// task difficulty level so that feature carries no label information. Throws
// Error("subject_degenerate") when reactivity is 0. Returned features are
// raw.
std::vector<LabeledSegment> run_calibration(const synthgen::SubjectProfile& profile,
                                            const CalibrationPlan& plan,
                                            const StreamConfig& stream_cfg,
                                            const FeatureConfig& feat_cfg, uint64_t seed,
                                            const synthgen::BandMixModel& mix = {},
                                            const synthgen::LatentModel& latent = {},
                                            const synthgen::ErrorModel& errors = {},
                                            int difficulty = 5, double trial_period = 2.0);

// Per-feature mean/std over all frames of the given windows, population
// convention, std floored at 1e-6.
NormStats baseline_stats(std::span<const FeatureSequence> windows);

// Z-scores segments in place.
void apply_norms(std::vector<LabeledSegment>& segments, const NormStats& norms);

struct Dataset {
    std::vector<lstm::Sample> train;
    std::vector<lstm::Sample> val;
};

// Stratified seeded split preserving class proportions. Throws
// Error("too_few_samples") when a class cannot contribute to both parts.
Dataset build_dataset(std::span<const LabeledSegment> segments, double val_fraction,
                      uint64_t seed);

struct ThresholdResult {
    Thresholds thresholds;
    bool calibration_weak = false;  // percentile ordering failed, fallback used
    double median_oneback = 0.0;
    double median_threeback = 0.0;
};

// T_low = 75th percentile of L over 1-back windows, T_high = 25th percentile
// over 3-back windows; falls back to (0.33, 0.66) when ordering fails.
ThresholdResult derive_thresholds(const lstm::ModelParams& model,
                                  std::span<const LabeledSegment> segments,
                                  Thresholds fallback = {0.33, 0.66});

// Linear-interpolation percentile (q in [0,1]) used by derive_thresholds.
double percentile(std::vector<double> values, double q);

struct CalibrationResult {
    lstm::LoadedModel model;
    ThresholdResult thresholds;
    std::vector<lstm::EpochStats> history;
    std::array<int, 3> class_counts{};
};

// Full pipeline: phases -> norms -> dataset -> training -> thresholds.
CalibrationResult calibrate_subject(const synthgen::SubjectProfile& profile,
                                    const CalibrationPlan& plan, const StreamConfig& stream_cfg,
                                    const FeatureConfig& feat_cfg, lstm::TrainConfig train_cfg,
                                    uint64_t seed, const synthgen::BandMixModel& mix = {},
                                    const synthgen::LatentModel& latent = {},
                                    const synthgen::ErrorModel& errors = {},
                                    Thresholds fallback = {0.33, 0.66}, int difficulty = 5,
                                    double trial_period = 2.0);

}  // namespace calibration
}  // namespace cladapt
