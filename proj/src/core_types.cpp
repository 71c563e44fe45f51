#include "cladapt/core_types.hpp"

#include "cladapt/errors.hpp"

namespace cladapt {

std::string to_string(LoadState s) {
    switch (s) {
        case LoadState::low: return "low";
        case LoadState::optimal: return "optimal";
        case LoadState::high: return "high";
    }
    return "?";
}

LoadState load_state_from_string(const std::string& s) {
    if (s == "low") return LoadState::low;
    if (s == "optimal") return LoadState::optimal;
    if (s == "high") return LoadState::high;
    throw Error("bad_state", "unknown load state: " + s);
}

LoadState classify_load(double load_score, const Thresholds& th) {
    if (load_score <= th.t_low) return LoadState::low;
    if (load_score >= th.t_high) return LoadState::high;
    return LoadState::optimal;
}

std::string to_string(InterventionKind k) {
    switch (k) {
        case InterventionKind::arrow_cue: return "arrow_cue";
        case InterventionKind::ghost_hand: return "ghost_hand";
        case InterventionKind::voice_explanation: return "voice_explanation";
        case InterventionKind::haptic_pulse: return "haptic_pulse";
        case InterventionKind::simplify_interface: return "simplify_interface";
        case InterventionKind::slow_progression: return "slow_progression";
        case InterventionKind::error_injection: return "error_injection";
        case InterventionKind::reflective_prompt: return "reflective_prompt";
        case InterventionKind::time_pressure: return "time_pressure";
        case InterventionKind::none: return "none";
    }
    return "?";
}

InterventionKind intervention_kind_from_string(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(InterventionKind::none); ++i) {
        const auto k = static_cast<InterventionKind>(i);
        if (to_string(k) == s) return k;
    }
    throw Error("bad_intervention", "unknown intervention kind: " + s);
}

bool is_scaffold(InterventionKind k) {
    switch (k) {
        case InterventionKind::arrow_cue:
        case InterventionKind::ghost_hand:
        case InterventionKind::voice_explanation:
        case InterventionKind::haptic_pulse:
        case InterventionKind::simplify_interface:
        case InterventionKind::slow_progression:
            return true;
        default:
            return false;
    }
}

bool is_challenge(InterventionKind k) {
    switch (k) {
        case InterventionKind::error_injection:
        case InterventionKind::reflective_prompt:
        case InterventionKind::time_pressure:
            return true;
        default:
            return false;
    }
}

}  // namespace cladapt
