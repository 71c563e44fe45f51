#include "cladapt/streams.hpp"

#include <algorithm>
#include <cmath>

namespace cladapt {

namespace {

bool is_finite(double v) { return std::isfinite(v); }

// Expected EEG rows per window.
size_t grid_rows(const StreamConfig& cfg) {
    return static_cast<size_t>(std::llround(std::ceil(cfg.window_len * cfg.sample_rate - 1e-9)));
}

}  // namespace

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::step_start: return "step_start";
        case EventKind::step_complete: return "step_complete";
        case EventKind::error: return "error";
        case EventKind::object_grab: return "object_grab";
        case EventKind::hint_shown: return "hint_shown";
        case EventKind::challenge_issued: return "challenge_issued";
    }
    return "?";
}

std::string to_string(ErrorType e) {
    switch (e) {
        case ErrorType::where: return "where";
        case ErrorType::how: return "how";
        case ErrorType::why: return "why";
    }
    return "?";
}

std::optional<EventKind> event_kind_from_string(const std::string& s) {
    if (s == "step_start") return EventKind::step_start;
    if (s == "step_complete") return EventKind::step_complete;
    if (s == "error") return EventKind::error;
    if (s == "object_grab") return EventKind::object_grab;
    if (s == "hint_shown") return EventKind::hint_shown;
    if (s == "challenge_issued") return EventKind::challenge_issued;
    return std::nullopt;
}

std::optional<ErrorType> error_type_from_string(const std::string& s) {
    if (s == "where") return ErrorType::where;
    if (s == "how") return ErrorType::how;
    if (s == "why") return ErrorType::why;
    return std::nullopt;
}

std::string to_string(PushResult r) {
    switch (r) {
        case PushResult::accepted: return "accepted";
        case PushResult::dropped_too_old: return "too_old";
        case PushResult::dropped_nan_value: return "nan_value";
        case PushResult::dropped_bad_channel_count: return "bad_channel_count";
        case PushResult::dropped_bad_step: return "bad_step";
        case PushResult::dropped_bad_module: return "bad_module";
        case PushResult::dropped_bad_difficulty: return "bad_difficulty";
        case PushResult::dropped_missing_error_type: return "missing_error_type";
        case PushResult::dropped_missing_object_ok: return "missing_object_ok";
    }
    return "?";
}

void StreamConfig::validate() const {
    if (sample_rate <= 0.0 || window_len <= 0.0 || cadence <= 0.0 || reorder_horizon < 0.0 ||
        skew_tolerance < 0.0) {
        throw Error("bad_config_value", "stream config values must be positive");
    }
}

StreamSync::StreamSync(StreamConfig cfg) : cfg_(cfg) {
    cfg_.validate();
}

void StreamSync::set_event_offset(double offset) {
    std::lock_guard lock(mu_);
    event_offset_ = offset;
}

PushResult StreamSync::push_eeg(EegSample sample) {
    std::lock_guard lock(mu_);
    ++eeg_counters_.pushed;

    PushResult result = PushResult::accepted;
    if (sample.channels.size() != static_cast<size_t>(kChannelCount)) {
        result = PushResult::dropped_bad_channel_count;
    } else if (!is_finite(sample.t) ||
               std::any_of(sample.channels.begin(), sample.channels.end(),
                           [](double v) { return !std::isfinite(v); })) {
        result = PushResult::dropped_nan_value;
    } else if (sample.t < newest_sample_t_ - cfg_.reorder_horizon) {
        result = PushResult::dropped_too_old;
    }

    if (result != PushResult::accepted) {
        ++eeg_counters_.dropped;
        return result;
    }

    newest_sample_t_ = std::max(newest_sample_t_, sample.t);
    // Mostly-in-order streams append; late samples get reinserted by t.
    if (samples_.empty() || samples_.back().t <= sample.t) {
        samples_.push_back(std::move(sample));
    } else {
        auto pos = std::upper_bound(samples_.begin(), samples_.end(), sample.t,
                                    [](double t, const EegSample& s) { return t < s.t; });
        samples_.insert(pos, std::move(sample));
    }
    ++eeg_counters_.accepted;
    return PushResult::accepted;
}

PushResult StreamSync::push_event(TaskEvent event) {
    std::lock_guard lock(mu_);
    ++event_counters_.pushed;
    event.t += event_offset_;

    PushResult result = PushResult::accepted;
    if (!is_finite(event.t)) {
        result = PushResult::dropped_nan_value;
    } else if (event.step_id < 1 || event.step_id > kStepCount) {
        result = PushResult::dropped_bad_step;
    } else if (event.module_id < 1 || event.module_id > kModuleCount) {
        result = PushResult::dropped_bad_module;
    } else if (event.difficulty < 1 || event.difficulty > kMaxDifficulty) {
        result = PushResult::dropped_bad_difficulty;
    } else if (event.kind == EventKind::error && !event.error_type) {
        result = PushResult::dropped_missing_error_type;
    } else if (event.kind == EventKind::object_grab && !event.object_ok) {
        result = PushResult::dropped_missing_object_ok;
    } else if (event.t < newest_event_t_ - cfg_.reorder_horizon || event.t <= last_close_t_) {
        // Beyond the reorder horizon, or inside an already-consumed span.
        result = PushResult::dropped_too_old;
    }

    if (result != PushResult::accepted) {
        ++event_counters_.dropped;
        return result;
    }

    newest_event_t_ = std::max(newest_event_t_, event.t);
    if (events_.empty() || events_.back().t <= event.t) {
        events_.push_back(event);
    } else {
        auto pos = std::upper_bound(events_.begin(), events_.end(), event.t,
                                    [](double t, const TaskEvent& e) { return t < e.t; });
        events_.insert(pos, event);
    }
    ++event_counters_.accepted;
    return PushResult::accepted;
}

AlignedWindow StreamSync::close_window(double t_close) {
    return close_impl(t_close, true);
}

AlignedWindow StreamSync::close_window_lossy(double t_close) {
    return close_impl(t_close, false);
}

AlignedWindow StreamSync::close_impl(double t_close, bool throw_on_loss) {
    std::lock_guard lock(mu_);
    if (t_close < cfg_.window_len - 1e-12) {
        throw Error("bad_close_time", "t_close precedes the first full window");
    }
    if (t_close <= last_close_t_) {
        throw Error("nonmonotone_close", "close_window timestamps must increase");
    }

    const size_t rows = grid_rows(cfg_);
    const double dt = 1.0 / cfg_.sample_rate;
    const double grid0 = t_close - cfg_.window_len;

    AlignedWindow w;
    w.t_close = t_close;
    w.eeg.assign(rows, {});

    // Assign each candidate sample to its nearest grid slot; a slot keeps the
    // best sample (smallest |skew|). Slots with no sample within
    // skew_tolerance stay zero-filled and are counted. This keeps a missing
    // sample from stealing its neighbour.
    std::vector<double> best_skew(rows, 1e300);
    auto first = std::lower_bound(samples_.begin(), samples_.end(),
                                  grid0 - cfg_.skew_tolerance,
                                  [](const EegSample& s, double t) { return s.t < t; });
    for (auto it = first; it != samples_.end(); ++it) {
        if (it->t > t_close + cfg_.skew_tolerance) break;
        const double pos = (it->t - grid0) / dt;
        const long slot = std::lround(pos);
        if (slot < 0 || slot >= static_cast<long>(rows)) continue;
        const double skew = std::abs(it->t - (grid0 + static_cast<double>(slot) * dt));
        if (skew > cfg_.skew_tolerance) continue;
        if (skew < best_skew[slot]) {
            best_skew[slot] = skew;
            for (int c = 0; c < kChannelCount; ++c) w.eeg[slot][c] = it->channels[c];
        }
    }
    for (size_t i = 0; i < rows; ++i) {
        if (best_skew[i] >= 1e299) ++w.dropped_samples;
    }
    w.lossy = w.dropped_samples * 4 > static_cast<int>(rows);
    if (w.lossy && throw_on_loss) {
        throw Error("insufficient_data", "more than 25% of EEG rows missing in window");
    }

    // Behavioral aggregates over the right-closed cadence span.
    const double span_lo = t_close - cfg_.cadence;
    for (const TaskEvent& e : events_) {
        if (e.t > t_close) break;
        if (e.t <= span_lo) continue;
        w.events_in_window.push_back(e);
        if (e.kind == EventKind::error) ++w.error_count;
    }
    // Events up to t_close are consumed now; fold them into the step context.
    for (const TaskEvent& e : events_) {
        if (e.t > t_close) break;
        if (e.kind == EventKind::step_start) last_step_start_t_ = e.t;
        current_difficulty_ = e.difficulty;
    }
    w.step_elapsed = t_close - last_step_start_t_;
    w.difficulty = current_difficulty_;

    // Prune consumed data. The next close is at t_close + cadence and needs
    // samples from t_close + cadence - window_len on.
    const double keep_from =
        std::min(t_close, t_close + cfg_.cadence - cfg_.window_len) - cfg_.skew_tolerance - dt;
    samples_.erase(samples_.begin(),
                   std::lower_bound(samples_.begin(), samples_.end(), keep_from,
                                    [](const EegSample& s, double t) { return s.t < t; }));
    events_.erase(events_.begin(),
                  std::upper_bound(events_.begin(), events_.end(), t_close,
                                   [](double t, const TaskEvent& e) { return t < e.t; }));
    last_close_t_ = t_close;
    return w;
}

StreamCounters StreamSync::eeg_counters() const {
    std::lock_guard lock(mu_);
    return eeg_counters_;
}

StreamCounters StreamSync::event_counters() const {
    std::lock_guard lock(mu_);
    return event_counters_;
}

std::optional<double> StreamSync::newest_eeg_t() const {
    std::lock_guard lock(mu_);
    if (newest_sample_t_ < -1e299) return std::nullopt;
    return newest_sample_t_;
}

}  // namespace cladapt
