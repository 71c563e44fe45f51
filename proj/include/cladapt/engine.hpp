#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cladapt/core_types.hpp"
#include "cladapt/features.hpp"
#include "cladapt/lstm.hpp"
#include "cladapt/streams.hpp"

namespace cladapt {

struct EngineConfig {
    int debounce_n = 2;            // consecutive windows before a state flips
    double cooldown_secs = 30.0;   // per intervention kind
    int repetition_k = 2;          // same mistake k times after a hint -> ghost hand
    bool max_one_challenge_per_step = true;
    Thresholds fallback_thresholds{0.33, 0.66};

    void validate() const;
};

struct InterventionRecord {
    InterventionKind kind = InterventionKind::none;
    std::optional<std::string> target;  // e.g. "step:3"
    std::string reason;
};

struct SuppressedRecord {
    InterventionKind kind = InterventionKind::none;
    std::string reason;  // "cooldown" or "step_already_challenged"
};

struct Decision {
    double t = 0.0;
    double load = 0.0;            // L in [0,1]
    std::array<double, 3> probs{};
    LoadState raw_state = LoadState::optimal;
    LoadState stable_state = LoadState::optimal;
    std::vector<InterventionRecord> interventions;
    std::vector<SuppressedRecord> suppressed;
    double latency_ms = 0.0;
    bool data_gap = false;
};

// Requires debounce_n identical consecutive raw states before the stable
// state changes; the first observation initializes it.
class Debouncer {
public:
    explicit Debouncer(int n) : n_(n) {}
    LoadState update(LoadState raw);
    std::optional<LoadState> stable() const { return stable_; }

private:
    int n_;
    std::optional<LoadState> stable_;
    std::optional<LoadState> candidate_;
    int run_ = 0;
};

// Most recent error's type within the window; nullopt when no error occurred.
std::optional<ErrorType> classify_confusion(std::span<const TaskEvent> events);

// The rule engine plus classification state, driven by (features, events)
// pairs. Shared between the live tick pipeline and log replay so both walk
// the identical code path.
class DecisionCore {
public:
    DecisionCore(const lstm::ModelParams& params, Thresholds thresholds, EngineConfig cfg);

    // One decision step. `features` are already normalized; `events` are the
    // window's behavioral events in time order. Data-gap windows skip the
    // debouncer and fire nothing. With rules disabled (static policy) the
    // classification still runs but no interventions are considered.
    Decision step(const lstm::FeatureMatrix& features, std::span<const TaskEvent> events,
                  double t_close, bool data_gap, bool rules_enabled = true);

    // Event-driven haptic rule for the wire path: fires immediately on a
    // wrong-object grab, subject to the same cooldown book-keeping.
    std::optional<InterventionRecord> on_wrong_object(const TaskEvent& e);

    const Thresholds& thresholds() const { return thresholds_; }

private:
    struct RepetitionKey {
        int step_id;
        ErrorType type;
        bool operator<(const RepetitionKey& o) const {
            return step_id != o.step_id ? step_id < o.step_id : type < o.type;
        }
    };

    bool cooldown_ok(InterventionKind k, double t) const;
    void fire(std::vector<InterventionRecord>& out, std::vector<SuppressedRecord>& sup,
              InterventionKind k, std::optional<std::string> target, const std::string& reason,
              double t);
    void ingest_events(std::span<const TaskEvent> events);

    const lstm::ModelParams& params_;
    Thresholds thresholds_;
    EngineConfig cfg_;
    Debouncer debouncer_;

    std::array<double, kInterventionKindCount> last_fired_{};
    bool ever_fired_[kInterventionKindCount] = {};
    int round_robin_ = 0;
    int current_step_ = 1;
    std::optional<int> last_challenged_step_;
    std::set<int> hinted_steps_;
    std::map<RepetitionKey, int> repeated_errors_;  // errors after a hint on that step
    std::vector<RepetitionKey> repetition_hits_;    // pairs that crossed k this window
    bool wrong_grab_seen_ = false;
    std::optional<int> wrong_grab_step_;
};

struct TickOutput {
    Decision decision;
    AlignedWindow window;
    FeatureSequence features;
    FeatureDiagnostics diagnostics;
};

// The cadence-tick pipeline: close window -> features -> inference ->
// debounce -> rules, with the wall-clock latency stamped on the decision.
class AdaptationEngine {
public:
    AdaptationEngine(const lstm::LoadedModel& model, StreamSync& stream, FeatureConfig fcfg,
                     EngineConfig ecfg);

    TickOutput tick(double t_close, bool rules_enabled = true);

    DecisionCore& core() { return core_; }

private:
    const lstm::LoadedModel& model_;
    StreamSync& stream_;
    FeatureConfig fcfg_;
    DecisionCore core_;
};

}  // namespace cladapt
