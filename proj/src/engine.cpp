#include "cladapt/engine.hpp"

#include <algorithm>

#include "cladapt/errors.hpp"

namespace cladapt {

namespace {

constexpr InterventionKind kChallengeRotation[3] = {
    InterventionKind::error_injection,
    InterventionKind::reflective_prompt,
    InterventionKind::time_pressure,
};

std::string step_target(int step_id) { return "step:" + std::to_string(step_id); }

}  // namespace

void EngineConfig::validate() const {
    if (debounce_n < 1 || cooldown_secs < 0.0 || repetition_k < 1 ||
        !fallback_thresholds.valid()) {
        throw Error("bad_config_value", "engine config out of range");
    }
}

LoadState Debouncer::update(LoadState raw) {
    if (!stable_) {
        stable_ = raw;
        candidate_.reset();
        run_ = 0;
        return *stable_;
    }
    if (raw == *stable_) {
        candidate_.reset();
        run_ = 0;
        return *stable_;
    }
    if (candidate_ && raw == *candidate_) {
        ++run_;
    } else {
        candidate_ = raw;
        run_ = 1;
    }
    if (run_ >= n_) {
        stable_ = raw;
        candidate_.reset();
        run_ = 0;
    }
    return *stable_;
}

std::optional<ErrorType> classify_confusion(std::span<const TaskEvent> events) {
    std::optional<ErrorType> latest;
    for (const TaskEvent& e : events) {
        if (e.kind == EventKind::error && e.error_type) latest = e.error_type;
    }
    return latest;
}

DecisionCore::DecisionCore(const lstm::ModelParams& params, Thresholds thresholds,
                           EngineConfig cfg)
    : params_(params), thresholds_(thresholds), cfg_(cfg), debouncer_(cfg.debounce_n) {
    cfg_.validate();
    if (!thresholds_.valid()) thresholds_ = cfg_.fallback_thresholds;
    last_fired_.fill(-1e300);
}

bool DecisionCore::cooldown_ok(InterventionKind k, double t) const {
    const int i = static_cast<int>(k);
    if (!ever_fired_[i]) return true;
    return t - last_fired_[i] >= cfg_.cooldown_secs;
}

void DecisionCore::fire(std::vector<InterventionRecord>& out, std::vector<SuppressedRecord>& sup,
                        InterventionKind k, std::optional<std::string> target,
                        const std::string& reason, double t) {
    for (const InterventionRecord& r : out) {
        if (r.kind == k) return;  // one firing per kind per decision
    }
    if (!cooldown_ok(k, t)) {
        sup.push_back({k, "cooldown"});
        return;
    }
    const int i = static_cast<int>(k);
    last_fired_[i] = t;
    ever_fired_[i] = true;
    out.push_back({k, std::move(target), reason});
}

void DecisionCore::ingest_events(std::span<const TaskEvent> events) {
    repetition_hits_.clear();
    wrong_grab_seen_ = false;
    wrong_grab_step_.reset();
    for (const TaskEvent& e : events) {
        current_step_ = e.step_id;  // every event names the step it happened on
        switch (e.kind) {
            case EventKind::step_start:
                break;
            case EventKind::step_complete:
                hinted_steps_.erase(e.step_id);
                for (auto it = repeated_errors_.begin(); it != repeated_errors_.end();) {
                    it = it->first.step_id == e.step_id ? repeated_errors_.erase(it) : ++it;
                }
                break;
            case EventKind::hint_shown:
                hinted_steps_.insert(e.step_id);
                break;
            case EventKind::error:
                if (e.error_type && hinted_steps_.count(e.step_id)) {
                    RepetitionKey key{e.step_id, *e.error_type};
                    if (++repeated_errors_[key] >= cfg_.repetition_k) {
                        repetition_hits_.push_back(key);
                        repeated_errors_[key] = 0;
                    }
                }
                break;
            case EventKind::object_grab:
                if (e.object_ok && !*e.object_ok) {
                    wrong_grab_seen_ = true;
                    wrong_grab_step_ = e.step_id;
                }
                break;
            case EventKind::challenge_issued:
                break;
        }
    }
}

Decision DecisionCore::step(const lstm::FeatureMatrix& features,
                            std::span<const TaskEvent> events, double t_close, bool data_gap,
                            bool rules_enabled) {
    Decision d;
    d.t = t_close;
    d.data_gap = data_gap;
    d.probs = lstm::forward(features, params_, lstm::RunMode::eval);
    d.load = lstm::load_score(d.probs);
    d.raw_state = classify_load(d.load, thresholds_);

    if (data_gap) {
        // Unreliable window: record the inference but leave the stable state
        // and rule bookkeeping untouched, and intervene with nothing.
        d.stable_state = debouncer_.stable().value_or(d.raw_state);
        return d;
    }

    d.stable_state = debouncer_.update(d.raw_state);
    if (!rules_enabled) return d;

    ingest_events(events);
    const std::optional<ErrorType> confusion = classify_confusion(events);

    // Rule priority: event rules first (any state), then the state rules.
    if (wrong_grab_seen_) {
        fire(d.interventions, d.suppressed, InterventionKind::haptic_pulse,
             step_target(wrong_grab_step_.value_or(current_step_)), "wrong_object", t_close);
    }
    if (!repetition_hits_.empty()) {
        const RepetitionKey& key = repetition_hits_.front();
        fire(d.interventions, d.suppressed, InterventionKind::ghost_hand, step_target(key.step_id),
             "repeated_" + to_string(key.type) + "_error_after_hint", t_close);
    }

    switch (d.stable_state) {
        case LoadState::high:
            if (confusion) {
                InterventionKind kind = InterventionKind::arrow_cue;
                switch (*confusion) {
                    case ErrorType::where: kind = InterventionKind::arrow_cue; break;
                    case ErrorType::how: kind = InterventionKind::ghost_hand; break;
                    case ErrorType::why: kind = InterventionKind::voice_explanation; break;
                }
                fire(d.interventions, d.suppressed, kind, step_target(current_step_),
                     "high_load_" + to_string(*confusion) + "_confusion", t_close);
            } else {
                fire(d.interventions, d.suppressed, InterventionKind::simplify_interface,
                     std::nullopt, "high_load_no_recent_error", t_close);
                fire(d.interventions, d.suppressed, InterventionKind::slow_progression,
                     std::nullopt, "high_load_no_recent_error", t_close);
            }
            break;
        case LoadState::low: {
            if (cfg_.max_one_challenge_per_step && last_challenged_step_ &&
                *last_challenged_step_ == current_step_) {
                d.suppressed.push_back(
                    {kChallengeRotation[round_robin_], "step_already_challenged"});
                break;
            }
            for (int i = 0; i < 3; ++i) {
                const InterventionKind kind = kChallengeRotation[(round_robin_ + i) % 3];
                if (!cooldown_ok(kind, t_close)) {
                    d.suppressed.push_back({kind, "cooldown"});
                    continue;
                }
                fire(d.interventions, d.suppressed, kind, step_target(current_step_),
                     "low_load_challenge", t_close);
                round_robin_ = (round_robin_ + i + 1) % 3;
                last_challenged_step_ = current_step_;
                break;
            }
            break;
        }
        case LoadState::optimal:
            break;
    }
    return d;
}

std::optional<InterventionRecord> DecisionCore::on_wrong_object(const TaskEvent& e) {
    if (e.kind != EventKind::object_grab || !e.object_ok || *e.object_ok) return std::nullopt;
    if (!cooldown_ok(InterventionKind::haptic_pulse, e.t)) return std::nullopt;
    const int i = static_cast<int>(InterventionKind::haptic_pulse);
    last_fired_[i] = e.t;
    ever_fired_[i] = true;
    return InterventionRecord{InterventionKind::haptic_pulse, step_target(e.step_id),
                              "wrong_object"};
}

AdaptationEngine::AdaptationEngine(const lstm::LoadedModel& model, StreamSync& stream,
                                   FeatureConfig fcfg, EngineConfig ecfg)
    : model_(model),
      stream_(stream),
      fcfg_(fcfg),
      core_(model.params, model.thresholds, ecfg) {
    fcfg_.validate();
}

TickOutput AdaptationEngine::tick(double t_close, bool rules_enabled) {
    const auto t0 = std::chrono::steady_clock::now();
    TickOutput out;
    out.window = stream_.close_window_lossy(t_close);
    out.features = feature_sequence(out.window, fcfg_, model_.norms, stream_.config().sample_rate,
                                    &out.diagnostics);
    out.decision = core_.step(lstm::to_matrix(out.features), out.window.events_in_window, t_close,
                              out.window.lossy, rules_enabled);
    const auto t1 = std::chrono::steady_clock::now();
    out.decision.latency_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    return out;
}

}  // namespace cladapt
