#include "cladapt/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "cladapt/errors.hpp"

namespace cladapt {
namespace synthgen {

namespace {

struct FreqRange {
    double lo, hi;
};
constexpr FreqRange kBandRanges[4] = {{4.0, 7.0}, {8.0, 13.0}, {14.0, 30.0}, {30.0, 50.0}};

// Std of the mean of 16 iid U(-0.5, 0.5) sources: 1 / (4 sqrt(12)).
constexpr double kVossStd = 0.07216878364870322;

constexpr StepInfo kSteps[kStepCount] = {
    {1, 1, "align_part"},        {2, 1, "mount_vise_parallels"},
    {3, 1, "mount_tool"},        {4, 1, "set_zero"},
    {5, 2, "set_spindle_speed"}, {6, 2, "position_axes"},
    {7, 2, "drill"},             {8, 2, "deburr_inspect"},
};

// Ground-truth confusion mix per step: {where, how, why} weights.
constexpr double kErrorTypeMix[kStepCount][3] = {
    {0.5, 0.3, 0.2},  // align_part
    {0.2, 0.5, 0.3},  // mount_vise_parallels
    {0.3, 0.5, 0.2},  // mount_tool
    {0.2, 0.4, 0.4},  // set_zero
    {0.2, 0.3, 0.5},  // set_spindle_speed
    {0.5, 0.3, 0.2},  // position_axes
    {0.2, 0.5, 0.3},  // drill
    {0.3, 0.3, 0.4},  // deburr_inspect
};

ErrorType draw_error_type(int step_id, Rng& rng) {
    const double* mix = kErrorTypeMix[step_id - 1];
    const double u = rng.uniform();
    if (u < mix[0]) return ErrorType::where;
    if (u < mix[0] + mix[1]) return ErrorType::how;
    return ErrorType::why;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void SubjectProfile::validate() const {
    if (skill < 0.0 || skill > 1.0 || reactivity < 0.0 || reactivity > 1.0 ||
        noise_level < 0.0 || tau <= 0.0) {
        throw Error("bad_config_value", "subject profile out of range");
    }
}

double error_probability(double load, const ErrorModel& m) {
    double p = m.p0 + m.overload_slope * std::max(0.0, load - m.overload_knee);
    if (load < m.lapse_knee) p += m.lapse_bonus;
    return clamp01(p);
}

double latent_target(double difficulty_norm, double skill,
                     std::span<const InterventionKind> active, const LatentModel& m) {
    double scaffold = 0.0, challenge = 0.0;
    for (InterventionKind k : active) {
        if (is_scaffold(k)) scaffold += m.scaffold_offset;
        if (is_challenge(k)) challenge += m.challenge_offset;
    }
    scaffold = std::max(scaffold, -m.offset_cap);
    challenge = std::min(challenge, m.offset_cap);
    return clamp01(0.5 + 0.5 * (difficulty_norm - skill) + scaffold + challenge);
}

double latent_step(double load, double dt, double target, double tau, const LatentModel& m,
                   Rng& rng) {
    const double drift = dt / tau * (target - load);
    const double noise = rng.gaussian(0.0, m.noise_sigma * std::sqrt(dt));
    return clamp01(load + drift + noise);
}

double nback_target(int level, double skill) {
    switch (level) {
        case 0: return 0.15;
        case 1: return 0.30;
        case 3: return 0.85 * (1.0 - 0.2 * skill);
        default: throw Error("bad_config_value", "n-back level must be 0 (rest), 1 or 3");
    }
}

EegSynth::EegSynth(const SubjectProfile& profile, const BandMixModel& mix, double sample_rate,
                   uint64_t seed)
    : sample_rate_(sample_rate),
      reactivity_(profile.reactivity),
      pink_scale_(profile.noise_level / kVossStd),
      mix_(mix),
      rng_(Rng(seed).fork(0x991E)) {
    profile.validate();
    // Oscillator frequencies and phases are subject traits: they stay fixed
    // across calibration and later sessions of the same subject. Only the
    // noise stream varies with the run seed.
    Rng trait_rng = Rng(profile.seed).fork(0xEE61);
    for (int c = 0; c < kChannelCount; ++c) {
        for (int b = 0; b < 4; ++b) {
            freq_[c][b] = trait_rng.uniform(kBandRanges[b].lo, kBandRanges[b].hi);
            phase_[c][b] = trait_rng.uniform(0.0, 2.0 * M_PI);
        }
        for (auto& row : pink_rows_[c]) row = rng_.uniform() - 0.5;
        pink_key_[c] = 0;
    }
}

double EegSynth::pink_sample(int channel) {
    // Voss-McCartney: refresh the white rows whose key bit flipped.
    auto& rows = pink_rows_[channel];
    auto& key = pink_key_[channel];
    const uint32_t last = key;
    key = (key + 1) & 0xFFFF;
    const uint32_t diff = last ^ key;
    double sum = 0.0;
    for (int i = 0; i < 16; ++i) {
        if (diff & (1u << i)) rows[i] = rng_.uniform() - 0.5;
        sum += rows[i];
    }
    return sum / 16.0;
}

EegSample EegSynth::next(double load) {
    EegSample s;
    s.t = t();
    s.channels.resize(kChannelCount);
    const double a_theta = std::max(0.0, mix_.theta_amp * (1.0 + mix_.k_theta * reactivity_ * load));
    const double a_alpha = std::max(0.0, mix_.alpha_amp * (1.0 + mix_.k_alpha * reactivity_ * load));
    const double amps[4] = {a_theta, a_alpha, mix_.beta_amp, mix_.gamma_amp};
    for (int c = 0; c < kChannelCount; ++c) {
        double v = 0.0;
        for (int b = 0; b < 4; ++b) {
            v += amps[b] * std::sin(2.0 * M_PI * freq_[c][b] * s.t + phase_[c][b]);
        }
        v += pink_scale_ * pink_sample(c);
        s.channels[c] = v;
    }
    ++n_;
    return s;
}

std::vector<EegSample> gen_eeg(double load, double secs, const SubjectProfile& profile,
                               uint64_t seed, const BandMixModel& mix, double sample_rate) {
    EegSynth synth(profile, mix, sample_rate, seed);
    const auto n = static_cast<size_t>(std::llround(secs * sample_rate));
    std::vector<EegSample> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(synth.next(load));
    return out;
}

std::span<const StepInfo> step_catalogue() { return kSteps; }

TaskSim::TaskSim(const SubjectProfile& profile, int difficulty_level, uint64_t seed,
                 const ErrorModel& errors, double action_period)
    : errors_(errors),
      action_period_(action_period),
      skill_(profile.skill),
      difficulty_(difficulty_level),
      next_action_t_(action_period),
      rng_(Rng(seed).fork(0x7A5C)) {
    required_ = std::max(2, static_cast<int>(std::lround(3.0 + 2.0 * (1.0 - skill_))));
}

TaskEvent TaskSim::make_event(EventKind kind, double t) const {
    TaskEvent e;
    e.t = t;
    e.kind = kind;
    e.step_id = step_;
    e.module_id = kSteps[step_ - 1].module_id;
    e.difficulty = difficulty_;
    return e;
}

void TaskSim::advance_step(std::vector<TaskEvent>& out, double t) {
    out.push_back(make_event(EventKind::step_complete, t));
    step_ = step_ % kStepCount + 1;  // wrap: training loops the task
    successes_ = 0;
    out.push_back(make_event(EventKind::step_start, t));
}

std::vector<TaskEvent> TaskSim::advance_to(double t, double load) {
    std::vector<TaskEvent> out;
    if (!started_) {
        started_ = true;
        out.push_back(make_event(EventKind::step_start, 0.0));
    }
    while (next_action_t_ <= t) {
        const double at = next_action_t_;
        next_action_t_ += action_period_;
        if (rng_.uniform() < error_probability(load, errors_)) {
            // Failed action. A share of failures are wrong-object grabs,
            // which read as "where" confusion and also carry the grab event.
            if (rng_.uniform() < 0.3) {
                TaskEvent g = make_event(EventKind::object_grab, at);
                g.object_ok = false;
                out.push_back(g);
                TaskEvent e = make_event(EventKind::error, at);
                e.error_type = ErrorType::where;
                out.push_back(e);
            } else {
                TaskEvent e = make_event(EventKind::error, at);
                e.error_type = draw_error_type(step_, rng_);
                out.push_back(e);
            }
        } else {
            if (rng_.uniform() < 0.5) {
                TaskEvent e = make_event(EventKind::object_grab, at);
                e.object_ok = true;
                out.push_back(e);
            }
            if (++successes_ >= required_) advance_step(out, at);
        }
    }
    return out;
}

std::vector<TaskEvent> TaskSim::on_interventions(std::span<const InterventionKind> kinds,
                                                 double t) {
    std::vector<TaskEvent> out;
    for (InterventionKind k : kinds) {
        if (k == InterventionKind::arrow_cue || k == InterventionKind::ghost_hand ||
            k == InterventionKind::voice_explanation) {
            out.push_back(make_event(EventKind::hint_shown, t));
        } else if (is_challenge(k)) {
            out.push_back(make_event(EventKind::challenge_issued, t));
        }
    }
    return out;
}

NbackSim::NbackSim(int difficulty_level, uint64_t seed, const ErrorModel& errors,
                   double trial_period, double block_secs)
    : errors_(errors),
      trial_period_(trial_period),
      block_secs_(block_secs),
      difficulty_(difficulty_level),
      next_trial_t_(trial_period),
      next_block_t_(block_secs),
      rng_(Rng(seed).fork(0x4BAC)) {}

TaskEvent NbackSim::make_event(EventKind kind, double t) const {
    TaskEvent e;
    e.t = t;
    e.kind = kind;
    e.step_id = 1;
    e.module_id = 1;
    e.difficulty = difficulty_;
    return e;
}

TaskEvent NbackSim::phase_start(double t) const {
    return make_event(EventKind::step_start, t);
}

std::vector<TaskEvent> NbackSim::advance_to(double t, double load) {
    std::vector<TaskEvent> out;
    while (next_trial_t_ <= t || next_block_t_ <= t) {
        if (next_block_t_ <= next_trial_t_) {
            out.push_back(make_event(EventKind::step_complete, next_block_t_));
            out.push_back(make_event(EventKind::step_start, next_block_t_));
            next_block_t_ += block_secs_;
            continue;
        }
        const double at = next_trial_t_;
        next_trial_t_ += trial_period_;
        if (rng_.uniform() < error_probability(load, errors_)) {
            TaskEvent e = make_event(EventKind::error, at);
            e.error_type = ErrorType::how;  // n-back misses are procedural slips
            out.push_back(e);
        }
    }
    return out;
}

}  // namespace synthgen
}  // namespace cladapt
