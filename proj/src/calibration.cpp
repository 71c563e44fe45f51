#include "cladapt/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "cladapt/errors.hpp"
#include "cladapt/rng.hpp"

namespace cladapt {
namespace calibration {

namespace {

struct PhaseSpec {
    Phase phase;
    double secs;
    int nback_level;    // 0 = rest, -1 = synthetic optimal
};

// Per-phase latent target; the synthetic optimal phase pins mid-range load.
double phase_target(const PhaseSpec& spec, double skill) {
    if (spec.nback_level < 0) return 0.5;
    return synthgen::nback_target(spec.nback_level, skill);
}

}  // namespace

void CalibrationPlan::validate() const {
    if (rest_secs <= 0.0 || oneback_secs <= 0.0 || threeback_secs <= 0.0 ||
        optimal_secs <= 0.0 || window_cadence <= 0.0) {
        throw Error("bad_config_value", "calibration plan durations must be positive");
    }
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::rest: return "rest";
        case Phase::oneback: return "oneback";
        case Phase::threeback: return "threeback";
        case Phase::synthetic_optimal: return "synthetic_optimal";
    }
    return "?";
}

LoadState phase_label(Phase p) {
    switch (p) {
        case Phase::rest: return LoadState::low;
        case Phase::oneback: return LoadState::low;
        case Phase::threeback: return LoadState::high;
        case Phase::synthetic_optimal: return LoadState::optimal;
    }
    return LoadState::low;
}

std::vector<double> window_close_times(double phase_secs, double window_len, double cadence) {
    std::vector<double> out;
    for (double t = window_len; t <= phase_secs + 1e-9; t += cadence) out.push_back(t);
    return out;
}

std::vector<LabeledSegment> run_calibration(const synthgen::SubjectProfile& profile,
                                            const CalibrationPlan& plan,
                                            const StreamConfig& stream_cfg,
                                            const FeatureConfig& feat_cfg, uint64_t seed,
                                            const synthgen::BandMixModel& mix,
                                            const synthgen::LatentModel& latent,
                                            const synthgen::ErrorModel& errors, int difficulty,
                                            double trial_period) {
    profile.validate();
    plan.validate();
    if (profile.reactivity < 1e-9) {
        throw Error("subject_degenerate",
                    "reactivity 0 makes calibration phases indistinguishable");
    }

    const PhaseSpec specs[] = {
        {Phase::rest, plan.rest_secs, 0},
        {Phase::oneback, plan.oneback_secs, 1},
        {Phase::synthetic_optimal, plan.optimal_secs, -1},
        {Phase::threeback, plan.threeback_secs, 3},
    };

    StreamConfig cal_cfg = stream_cfg;
    cal_cfg.cadence = plan.window_cadence;

    const NormStats identity = NormStats::identity();
    std::vector<LabeledSegment> segments;
    Rng base(seed);

    int phase_idx = 0;
    for (const PhaseSpec& spec : specs) {
        LabeledSegment seg;
        seg.phase = spec.phase;
        seg.label = phase_label(spec.phase);

        StreamSync stream(cal_cfg);
        synthgen::EegSynth synth(profile, mix, cal_cfg.sample_rate,
                                 base.fork(100 + phase_idx).seed());
        synthgen::NbackSim task(difficulty, base.fork(200 + phase_idx).seed(), errors,
                                trial_period);
        Rng latent_rng = base.fork(300 + phase_idx);

        const double target = phase_target(spec, profile.skill);
        const double dt = 1.0 / cal_cfg.sample_rate;
        // Start each phase already near its target; transitions between
        // phases are not part of the labeled data.
        double load = target;

        stream.push_event(task.phase_start(0.0));
        auto closes = window_close_times(spec.secs, cal_cfg.window_len, cal_cfg.cadence);
        size_t next_close = 0;

        const auto n_samples = static_cast<size_t>(std::llround(spec.secs / dt));
        for (size_t i = 0; i < n_samples; ++i) {
            load = synthgen::latent_step(load, dt, target, profile.tau, latent, latent_rng);
            EegSample s = synth.next(load);
            const double t = s.t;
            stream.push_eeg(std::move(s));
            if (spec.phase != Phase::rest) {
                for (TaskEvent& e : task.advance_to(t, load)) stream.push_event(e);
            }
            while (next_close < closes.size() && t >= closes[next_close] - 1e-9) {
                AlignedWindow w = stream.close_window(closes[next_close]);
                seg.windows.push_back(
                    feature_sequence(w, feat_cfg, identity, cal_cfg.sample_rate));
                ++next_close;
            }
        }
        // A close landing on the phase boundary has all its samples by now.
        for (; next_close < closes.size(); ++next_close) {
            AlignedWindow w = stream.close_window(closes[next_close]);
            seg.windows.push_back(feature_sequence(w, feat_cfg, identity, cal_cfg.sample_rate));
        }
        segments.push_back(std::move(seg));
        ++phase_idx;
    }
    return segments;
}

NormStats baseline_stats(std::span<const FeatureSequence> windows) {
    NormStats out;
    out.mean.fill(0.0);
    out.stddev.fill(0.0);
    size_t n = 0;
    for (const FeatureSequence& w : windows) n += w.frames.size();
    if (n == 0) throw Error("empty_segment", "no windows to compute stats from");

    for (const FeatureSequence& w : windows) {
        for (const auto& f : w.frames) {
            for (int i = 0; i < kFeatureCount; ++i) out.mean[i] += f[i];
        }
    }
    for (int i = 0; i < kFeatureCount; ++i) out.mean[i] /= static_cast<double>(n);
    for (const FeatureSequence& w : windows) {
        for (const auto& f : w.frames) {
            for (int i = 0; i < kFeatureCount; ++i) {
                const double d = f[i] - out.mean[i];
                out.stddev[i] += d * d;
            }
        }
    }
    for (int i = 0; i < kFeatureCount; ++i) {
        out.stddev[i] = std::max(std::sqrt(out.stddev[i] / static_cast<double>(n)), kStdFloor);
    }
    return out;
}

void apply_norms(std::vector<LabeledSegment>& segments, const NormStats& norms) {
    for (LabeledSegment& seg : segments) {
        for (FeatureSequence& w : seg.windows) {
            for (auto& f : w.frames) {
                for (int i = 0; i < kFeatureCount; ++i) f[i] = norms.z(i, f[i]);
            }
        }
    }
}

Dataset build_dataset(std::span<const LabeledSegment> segments, double val_fraction,
                      uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw Error("bad_config_value", "val_fraction must lie in (0,1)");
    }
    std::array<std::vector<lstm::Sample>, 3> by_class;
    for (const LabeledSegment& seg : segments) {
        for (const FeatureSequence& w : seg.windows) {
            by_class[static_cast<int>(seg.label)].push_back(
                {lstm::to_matrix(w), static_cast<int>(seg.label)});
        }
    }
    Dataset out;
    Rng rng = Rng(seed).fork(11);
    for (int k = 0; k < 3; ++k) {
        auto& members = by_class[k];
        if (members.size() < 2) {
            throw Error("too_few_samples", "class " + std::to_string(k) +
                                               " has too few windows to split");
        }
        rng.shuffle(members);
        auto n_val = static_cast<size_t>(
            std::llround(val_fraction * static_cast<double>(members.size())));
        n_val = std::clamp<size_t>(n_val, 1, members.size() - 1);
        for (size_t i = 0; i < members.size(); ++i) {
            (i < n_val ? out.val : out.train).push_back(std::move(members[i]));
        }
    }
    // One more seeded shuffle so classes interleave in the batches.
    rng.shuffle(out.train);
    rng.shuffle(out.val);
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("empty_segment", "percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

ThresholdResult derive_thresholds(const lstm::ModelParams& model,
                                  std::span<const LabeledSegment> segments,
                                  Thresholds fallback) {
    std::vector<double> oneback, threeback;
    for (const LabeledSegment& seg : segments) {
        if (seg.phase != Phase::oneback && seg.phase != Phase::threeback) continue;
        for (const FeatureSequence& w : seg.windows) {
            const double l =
                lstm::load_score(lstm::forward(w, model, lstm::RunMode::eval));
            (seg.phase == Phase::oneback ? oneback : threeback).push_back(l);
        }
    }
    if (oneback.empty() || threeback.empty()) {
        throw Error("empty_segment", "thresholds need both 1-back and 3-back windows");
    }
    ThresholdResult out;
    out.median_oneback = percentile(oneback, 0.5);
    out.median_threeback = percentile(threeback, 0.5);
    const double t_low = percentile(oneback, 0.75);
    const double t_high = percentile(threeback, 0.25);
    if (t_low < t_high && Thresholds{t_low, t_high}.valid()) {
        out.thresholds = {t_low, t_high};
    } else {
        out.thresholds = fallback;
        out.calibration_weak = true;
    }
    return out;
}

CalibrationResult calibrate_subject(const synthgen::SubjectProfile& profile,
                                    const CalibrationPlan& plan, const StreamConfig& stream_cfg,
                                    const FeatureConfig& feat_cfg, lstm::TrainConfig train_cfg,
                                    uint64_t seed, const synthgen::BandMixModel& mix,
                                    const synthgen::LatentModel& latent,
                                    const synthgen::ErrorModel& errors, Thresholds fallback,
                                    int difficulty, double trial_period) {
    auto segments = run_calibration(profile, plan, stream_cfg, feat_cfg, seed, mix, latent,
                                    errors, difficulty, trial_period);

    // Normalization stats come from the full calibration record (rest plus
    // task phases): rest alone leaves the behavioral features degenerate.
    std::vector<FeatureSequence> all;
    for (const LabeledSegment& seg : segments) {
        all.insert(all.end(), seg.windows.begin(), seg.windows.end());
    }
    const NormStats norms = baseline_stats(all);
    apply_norms(segments, norms);

    Dataset ds = build_dataset(segments, train_cfg.val_fraction, seed);
    train_cfg.seed = seed;
    lstm::TrainResult tr = lstm::train_split(std::move(ds.train), ds.val, train_cfg);

    CalibrationResult result;
    result.thresholds = derive_thresholds(tr.params, segments, fallback);
    result.model.params = std::move(tr.params);
    result.model.thresholds = result.thresholds.thresholds;
    result.model.norms = norms;
    result.history = std::move(tr.history);
    for (const LabeledSegment& seg : segments) {
        result.class_counts[static_cast<int>(seg.label)] +=
            static_cast<int>(seg.windows.size());
    }
    return result;
}

}  // namespace calibration
}  // namespace cladapt
