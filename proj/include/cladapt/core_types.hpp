#pragma once

#include <array>
#include <string>

namespace cladapt {

// Discrete cognitive load state. Also used as the class label of
// training windows (class index == enum value).
enum class LoadState { low = 0, optimal = 1, high = 2 };

std::string to_string(LoadState s);
LoadState load_state_from_string(const std::string& s);

// Per-subject cut points partitioning the load score into the three states:
// low iff L <= t_low, high iff L >= t_high, optimal otherwise.
struct Thresholds {
    double t_low = 0.33;
    double t_high = 0.66;

    bool valid() const { return 0.0 < t_low && t_low < t_high && t_high < 1.0; }
};

LoadState classify_load(double load_score, const Thresholds& th);

// Everything the adaptation layer can do to the trainee.
enum class InterventionKind {
    arrow_cue = 0,
    ghost_hand,
    voice_explanation,
    haptic_pulse,
    simplify_interface,
    slow_progression,
    error_injection,
    reflective_prompt,
    time_pressure,
    none,
};

inline constexpr int kInterventionKindCount = 9;  // excluding `none`

std::string to_string(InterventionKind k);
InterventionKind intervention_kind_from_string(const std::string& s);

// Scaffolding kinds lower the trainee's load target, challenge kinds raise it.
bool is_scaffold(InterventionKind k);
bool is_challenge(InterventionKind k);

}  // namespace cladapt
