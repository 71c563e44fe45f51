#include "cladapt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "cladapt/calibration.hpp"
#include "cladapt/errors.hpp"
#include "cladapt/rng.hpp"
#include "cladapt/synthgen.hpp"

namespace cladapt {
namespace scenario {

std::string to_string(Policy p) {
    return p == Policy::adaptive ? "adaptive" : "static";
}

Policy policy_from_string(const std::string& s) {
    if (s == "adaptive") return Policy::adaptive;
    if (s == "static") return Policy::static_policy;
    throw Error("bad_policy", "policy must be 'static' or 'adaptive'");
}

namespace {

struct ActiveIntervention {
    InterventionKind kind;
    double until;
};

}  // namespace

ScenarioStats run_scenario(const lstm::LoadedModel& model, const AppConfig& cfg, Policy policy,
                           double session_secs, uint64_t seed, SessionLog* log) {
    cfg.validate();
    if (session_secs <= 0.0) throw Error("bad_config_value", "session_secs must be positive");

    Rng base(seed);
    StreamSync stream(cfg.stream);
    AdaptationEngine engine(model, stream, cfg.features, cfg.engine);
    synthgen::EegSynth synth(cfg.sim.profile, cfg.sim.mix, cfg.stream.sample_rate,
                             base.fork(1).seed());
    synthgen::TaskSim task(cfg.sim.profile, cfg.sim.difficulty, base.fork(2).seed(),
                           cfg.sim.errors, cfg.sim.action_period);
    Rng latent_rng = base.fork(3);

    const bool adaptive = policy == Policy::adaptive;
    const double dt = 1.0 / cfg.stream.sample_rate;
    const double difficulty_norm = (static_cast<double>(cfg.sim.difficulty) - 1.0) / 4.0;
    const double first_close = std::max(cfg.stream.window_len, cfg.stream.cadence);

    double load = cfg.sim.latent.initial_load;
    double next_close = first_close;
    std::vector<ActiveIntervention> active;
    std::deque<TaskEvent> pending;  // intervention echoes scheduled for the near future
    std::vector<InterventionKind> active_kinds;

    ScenarioStats stats;
    size_t optimal_samples = 0;
    const auto n_samples = static_cast<size_t>(std::llround(session_secs * cfg.stream.sample_rate));

    auto do_tick = [&](double t_close) {
        TickOutput out = engine.tick(t_close, adaptive);
        ++stats.decisions;
        stats.latencies_ms.push_back(out.decision.latency_ms);
        stats.window_rows.push_back(out.window.eeg.size());
        ++stats.stable_counts[static_cast<int>(out.decision.stable_state)];
        stats.interventions_fired += static_cast<int>(out.decision.interventions.size());

        if (adaptive && !out.decision.interventions.empty()) {
            std::vector<InterventionKind> kinds;
            for (const auto& r : out.decision.interventions) {
                kinds.push_back(r.kind);
                const double effect = r.kind == InterventionKind::haptic_pulse
                                          ? cfg.sim.haptic_effect_secs
                                          : cfg.sim.intervention_effect_secs;
                active.push_back({r.kind, t_close + effect});
            }
            // The task environment acknowledges just after the decision.
            for (TaskEvent& e : task.on_interventions(kinds, t_close + 0.05)) {
                pending.push_back(e);
            }
        }
        if (log) {
            for (const TaskEvent& e : out.window.events_in_window) log->event(e);
            log->eeg_summary(t_close, out.window, out.diagnostics);
            log->features(out.features, out.decision.data_gap);
            log->decision(out.decision, load);
        }
    };

    for (size_t i = 0; i < n_samples; ++i) {
        active_kinds.clear();
        const double now = static_cast<double>(i) * dt;
        std::erase_if(active, [&](const ActiveIntervention& a) { return a.until <= now; });
        for (const auto& a : active) active_kinds.push_back(a.kind);

        const double target =
            synthgen::latent_target(difficulty_norm, cfg.sim.profile.skill, active_kinds,
                                    cfg.sim.latent);
        load = synthgen::latent_step(load, dt, target, cfg.sim.profile.tau, cfg.sim.latent,
                                     latent_rng);
        if (load > 0.33 && load < 0.66) ++optimal_samples;

        EegSample s = synth.next(load);
        const double t = s.t;
        stream.push_eeg(std::move(s));
        for (TaskEvent& e : task.advance_to(t, load)) stream.push_event(e);
        while (!pending.empty() && pending.front().t <= t) {
            stream.push_event(pending.front());
            pending.pop_front();
        }
        while (next_close <= session_secs + 1e-9 && t >= next_close - 1e-9) {
            do_tick(next_close);
            next_close += cfg.stream.cadence;
        }
    }
    // Ticks landing exactly on the session boundary have all samples by now.
    while (next_close <= session_secs + 1e-9) {
        do_tick(next_close);
        next_close += cfg.stream.cadence;
    }

    stats.optimal_fraction =
        static_cast<double>(optimal_samples) / static_cast<double>(n_samples);
    return stats;
}

std::vector<lstm::Sample> make_labeled_dataset(const AppConfig& cfg, int per_class,
                                               uint64_t seed) {
    cfg.validate();
    if (per_class < 1) throw Error("bad_config_value", "per_class must be positive");

    // Contiguous non-overlapping windows keep generation cheap.
    StreamConfig sc = cfg.stream;
    sc.cadence = sc.window_len;

    Rng base(seed);
    const double dt = 1.0 / sc.sample_rate;
    std::vector<lstm::Sample> raw;

    for (int cls = 0; cls < 3; ++cls) {
        const double target = cfg.sim.class_targets[cls];
        int made = 0;
        int segment = 0;
        while (made < per_class) {
            // Short segments with fresh difficulty decorrelate that feature
            // from the label.
            const int seg_windows = std::min(per_class - made, 25);
            const double seg_secs =
                sc.window_len + sc.cadence * static_cast<double>(seg_windows - 1) + dt;
            Rng seg_rng = base.fork(static_cast<uint64_t>(cls) * 1000 + segment);
            const int difficulty = 1 + static_cast<int>(seg_rng.uniform_u64(kMaxDifficulty));

            StreamSync stream(sc);
            synthgen::EegSynth synth(cfg.sim.profile, cfg.sim.mix, sc.sample_rate,
                                     seg_rng.fork(1).seed());
            synthgen::TaskSim task(cfg.sim.profile, difficulty, seg_rng.fork(2).seed(),
                                   cfg.sim.errors, cfg.sim.action_period);
            Rng latent_rng = seg_rng.fork(3);
            double load = target;

            double next_close = sc.window_len;
            const auto n = static_cast<size_t>(std::llround(seg_secs * sc.sample_rate));
            for (size_t i = 0; i < n && made < per_class; ++i) {
                load = synthgen::latent_step(load, dt, target, cfg.sim.profile.tau,
                                             cfg.sim.latent, latent_rng);
                EegSample s = synth.next(load);
                const double t = s.t;
                stream.push_eeg(std::move(s));
                for (TaskEvent& e : task.advance_to(t, load)) stream.push_event(e);
                if (t >= next_close - 1e-9) {
                    AlignedWindow w = stream.close_window(next_close);
                    FeatureSequence seq = feature_sequence(w, cfg.features,
                                                           NormStats::identity(), sc.sample_rate);
                    raw.push_back({lstm::to_matrix(seq), cls});
                    ++made;
                    next_close += sc.cadence;
                }
            }
            ++segment;
        }
    }

    // Z-score against the dataset's own stats (the calibration pipeline does
    // the same against calibration stats).
    std::array<double, kFeatureCount> mean{}, sd{};
    size_t n = 0;
    for (const auto& s : raw) {
        for (const auto& row : s.x) {
            for (int i = 0; i < kFeatureCount; ++i) mean[i] += row[i];
            ++n;
        }
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (const auto& s : raw) {
        for (const auto& row : s.x) {
            for (int i = 0; i < kFeatureCount; ++i) {
                const double d = row[i] - mean[i];
                sd[i] += d * d;
            }
        }
    }
    for (auto& v : sd) v = std::max(std::sqrt(v / static_cast<double>(n)), kStdFloor);
    for (auto& s : raw) {
        for (auto& row : s.x) {
            for (int i = 0; i < kFeatureCount; ++i) row[i] = (row[i] - mean[i]) / sd[i];
        }
    }
    return raw;
}

BenchReport bench_latency(const lstm::LoadedModel& model, const AppConfig& cfg, int iters,
                          uint64_t seed) {
    cfg.validate();
    if (iters < 1) throw Error("bad_config_value", "iters must be positive");

    StreamSync stream(cfg.stream);
    AdaptationEngine engine(model, stream, cfg.features, cfg.engine);
    synthgen::EegSynth synth(cfg.sim.profile, cfg.sim.mix, cfg.stream.sample_rate,
                             Rng(seed).fork(1).seed());

    std::vector<double> lat;
    lat.reserve(iters);
    double next_close = std::max(cfg.stream.window_len, cfg.stream.cadence);
    const auto per_tick = static_cast<size_t>(
        std::llround(cfg.stream.cadence * cfg.stream.sample_rate));

    // Lead-in so the first window is full.
    const auto lead = static_cast<size_t>(
        std::llround(next_close * cfg.stream.sample_rate));
    for (size_t i = 0; i < lead; ++i) stream.push_eeg(synth.next(0.5));

    for (int k = 0; k < iters; ++k) {
        TickOutput out = engine.tick(next_close);
        lat.push_back(out.decision.latency_ms);
        next_close += cfg.stream.cadence;
        for (size_t i = 0; i < per_tick; ++i) stream.push_eeg(synth.next(0.5));
    }

    std::sort(lat.begin(), lat.end());
    auto pct = [&](double q) {
        const double h = q * static_cast<double>(lat.size() - 1);
        const auto lo = static_cast<size_t>(h);
        if (lo + 1 >= lat.size()) return lat.back();
        return lat[lo] + (h - static_cast<double>(lo)) * (lat[lo + 1] - lat[lo]);
    };
    BenchReport r;
    r.iters = iters;
    r.p50_ms = pct(0.50);
    r.p95_ms = pct(0.95);
    r.p99_ms = pct(0.99);
    r.max_ms = lat.back();
    double sum = 0.0;
    for (double v : lat) sum += v;
    r.mean_ms = sum / static_cast<double>(lat.size());
    return r;
}

}  // namespace scenario
}  // namespace cladapt
