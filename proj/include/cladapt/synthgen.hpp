#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cladapt/core_types.hpp"
#include "cladapt/rng.hpp"
#include "cladapt/streams.hpp"

namespace cladapt {
namespace synthgen {

// Simulated trainee. `reactivity` scales how strongly load shifts the EEG
// bands; `tau` is the latent load time constant in seconds.
struct SubjectProfile {
    double skill = 0.2;        // [0,1]
    double reactivity = 0.8;   // [0,1]
    double noise_level = 2.0;  // pink noise amplitude, microvolts RMS
    double tau = 8.0;          // seconds
    uint64_t seed = 1;

    void validate() const;
};

// Band oscillator amplitudes (microvolts) and their load couplings. The
// effective theta amplitude grows and alpha shrinks as load rises:
// A_theta(l) = theta_amp * (1 + k_theta * reactivity * l), likewise alpha.
struct BandMixModel {
    double theta_amp = 6.0;
    double alpha_amp = 10.0;
    double beta_amp = 4.0;
    double gamma_amp = 2.0;
    double k_theta = 0.8;
    double k_alpha = -0.6;
};

// Latent load dynamics parameters.
struct LatentModel {
    double noise_sigma = 0.02;        // per sqrt(second)
    double scaffold_offset = -0.15;   // per active scaffold, capped
    double challenge_offset = 0.15;   // per active challenge, capped
    double offset_cap = 0.3;
    double initial_load = 0.5;
};

// Error model: p = p0 + a * max(0, l - 0.66) + b * [l < 0.33].
struct ErrorModel {
    double p0 = 0.02;
    double overload_slope = 0.5;    // a
    double lapse_bonus = 0.08;      // b
    double overload_knee = 0.66;
    double lapse_knee = 0.33;
};

double error_probability(double load, const ErrorModel& m = {});

// Steering target for the latent load given task difficulty, skill, and the
// currently active interventions.
double latent_target(double difficulty_norm, double skill,
                     std::span<const InterventionKind> active, const LatentModel& m = {});

// One Euler step of the first-order load dynamics with diffusion noise.
double latent_step(double load, double dt, double target, double tau, const LatentModel& m,
                   Rng& rng);

// n-back phase targets: rest 0.15, 1-back 0.30, 3-back 0.85 scaled toward
// 0.5 as skill approaches 1. `level` 0 means rest.
double nback_target(int level, double skill);

// 14-channel EEG synthesizer: per channel, one oscillator per band (frequency
// drawn uniformly inside the band, fixed per stream) plus Voss-McCartney pink
// noise, with theta/alpha amplitudes coupled to the instantaneous load.
class EegSynth {
public:
    EegSynth(const SubjectProfile& profile, const BandMixModel& mix, double sample_rate,
             uint64_t seed);

    // Next sample at the current load; advances stream time by 1/rate.
    EegSample next(double load);

    double t() const { return static_cast<double>(n_) / sample_rate_; }

private:
    double pink_sample(int channel);

    double sample_rate_;
    double reactivity_;
    double pink_scale_;
    BandMixModel mix_;
    uint64_t n_ = 0;
    std::array<std::array<double, 4>, kChannelCount> freq_{};   // per channel per band
    std::array<std::array<double, 4>, kChannelCount> phase_{};
    // Voss-McCartney state per channel.
    std::array<std::array<double, 16>, kChannelCount> pink_rows_{};
    std::array<uint32_t, kChannelCount> pink_key_{};
    Rng rng_;
};

// Convenience one-shot generator at constant load.
std::vector<EegSample> gen_eeg(double load, double secs, const SubjectProfile& profile,
                               uint64_t seed, const BandMixModel& mix = {},
                               double sample_rate = 128.0);

// The 2-module / 8-step task catalogue.
struct StepInfo {
    int step_id;
    int module_id;
    const char* name;
};
std::span<const StepInfo> step_catalogue();

// Simulated trainee working through the task. Actions happen on a fixed
// grid; each action fails with error_probability(load), failures emit error
// or wrong-object-grab events, successes advance the step.
class TaskSim {
public:
    TaskSim(const SubjectProfile& profile, int difficulty_level, uint64_t seed,
            const ErrorModel& errors = {}, double action_period = 2.0);

    // Advances simulated time to `t`, producing any events due in between.
    std::vector<TaskEvent> advance_to(double t, double load);

    // Reaction of the task environment to an engine decision: scaffolding
    // hints emit hint_shown, challenges emit challenge_issued.
    std::vector<TaskEvent> on_interventions(std::span<const InterventionKind> kinds, double t);

    int current_step() const { return step_; }

private:
    TaskEvent make_event(EventKind kind, double t) const;
    void advance_step(std::vector<TaskEvent>& out, double t);

    ErrorModel errors_;
    double action_period_;
    double skill_;
    int difficulty_;
    int step_ = 1;
    int successes_ = 0;
    int required_ = 4;
    double next_action_t_;
    Rng rng_;
    bool started_ = false;
};

// n-back calibration task: trials on a fixed grid, misses become error
// events. Trials are grouped into fixed-length step blocks so step timing
// statistics resemble live task windows.
class NbackSim {
public:
    NbackSim(int difficulty_level, uint64_t seed, const ErrorModel& errors = {},
             double trial_period = 2.0, double block_secs = 20.0);

    std::vector<TaskEvent> advance_to(double t, double load);
    TaskEvent phase_start(double t) const;

private:
    TaskEvent make_event(EventKind kind, double t) const;

    ErrorModel errors_;
    double trial_period_;
    double block_secs_;
    int difficulty_;
    double next_trial_t_;
    double next_block_t_;
    Rng rng_;
};

}  // namespace synthgen
}  // namespace cladapt
