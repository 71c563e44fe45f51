#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cladapt/errors.hpp"

namespace cladapt {

inline constexpr int kChannelCount = 14;
inline constexpr int kStepCount = 8;
inline constexpr int kModuleCount = 2;
inline constexpr int kMaxDifficulty = 5;

// One EEG sample. `t` is monotone stream time in seconds; channel values are
// in microvolts. Channel count is validated on push (wire input may be wrong).
struct EegSample {
    double t = 0.0;
    std::vector<double> channels;
};

enum class EventKind {
    step_start,
    step_complete,
    error,
    object_grab,
    hint_shown,
    challenge_issued,
};

enum class ErrorType { where, how, why };

std::string to_string(EventKind k);
std::string to_string(ErrorType e);
std::optional<EventKind> event_kind_from_string(const std::string& s);
std::optional<ErrorType> error_type_from_string(const std::string& s);

// One behavioral event from the task side. `error_type` is required for
// `error` events, `object_ok` for `object_grab` events.
struct TaskEvent {
    double t = 0.0;
    EventKind kind = EventKind::step_start;
    int step_id = 1;      // 1..8
    int module_id = 1;    // 1..2
    std::optional<ErrorType> error_type;
    std::optional<bool> object_ok;
    int difficulty = 3;   // 1..5
};

struct StreamConfig {
    double sample_rate = 128.0;      // Hz
    double window_len = 2.0;         // seconds of EEG per analysis window
    double cadence = 10.0;           // seconds between window closes
    double reorder_horizon = 0.5;    // seconds of tolerated out-of-order arrival
    double skew_tolerance = 0.05;    // max |grid - sample| timestamp skew

    void validate() const;
};

// A synchronized analysis slice: the trailing `window_len` seconds of EEG on
// a fixed grid, plus behavioral aggregates over the full cadence span
// (t_close - cadence, t_close].
struct AlignedWindow {
    double t_close = 0.0;
    std::vector<std::array<double, kChannelCount>> eeg;  // rows x 14
    std::vector<TaskEvent> events_in_window;
    int error_count = 0;
    double step_elapsed = 0.0;   // seconds on the current step at t_close
    int difficulty = 3;
    int dropped_samples = 0;     // zero-filled grid rows
    bool lossy = false;          // > 25% of rows missing
};

enum class PushResult {
    accepted,
    dropped_too_old,
    dropped_nan_value,
    dropped_bad_channel_count,
    dropped_bad_step,
    dropped_bad_module,
    dropped_bad_difficulty,
    dropped_missing_error_type,
    dropped_missing_object_ok,
};

inline bool accepted(PushResult r) { return r == PushResult::accepted; }
std::string to_string(PushResult r);

struct StreamCounters {
    uint64_t pushed = 0;
    uint64_t accepted = 0;
    uint64_t dropped = 0;
};

// Ingests the two timestamped streams, reorders within the configured
// horizon, and cuts aligned windows on demand. One producer per stream plus
// one consumer may call concurrently; a mutex serializes all operations.
class StreamSync {
public:
    explicit StreamSync(StreamConfig cfg);

    PushResult push_eeg(EegSample sample);
    PushResult push_event(TaskEvent event);

    // Constant offset that moves the event clock onto the EEG clock.
    static double align_clocks(double eeg_t0, double event_t0) { return eeg_t0 - event_t0; }

    // Offset added to every subsequently pushed event timestamp.
    void set_event_offset(double offset);

    // Cuts the window ending at t_close. Throws Error("insufficient_data")
    // when more than 25% of the expected EEG rows are missing.
    AlignedWindow close_window(double t_close);

    // Same, but always returns the window; heavy loss only sets `lossy`.
    AlignedWindow close_window_lossy(double t_close);

    StreamCounters eeg_counters() const;
    StreamCounters event_counters() const;

    // Timestamp of the newest accepted EEG sample, if any.
    std::optional<double> newest_eeg_t() const;

    const StreamConfig& config() const { return cfg_; }

private:
    AlignedWindow close_impl(double t_close, bool throw_on_loss);

    StreamConfig cfg_;
    mutable std::mutex mu_;

    std::vector<EegSample> samples_;  // sorted by t
    std::vector<TaskEvent> events_;   // sorted by t (stable on ties)
    double event_offset_ = 0.0;

    double newest_sample_t_ = -1e300;
    double newest_event_t_ = -1e300;
    double last_close_t_ = -1e300;

    // Step context carried across closes.
    double last_step_start_t_ = 0.0;
    int current_difficulty_ = 3;

    StreamCounters eeg_counters_;
    StreamCounters event_counters_;
};

}  // namespace cladapt
