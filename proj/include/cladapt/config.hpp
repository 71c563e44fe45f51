#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "cladapt/calibration.hpp"
#include "cladapt/engine.hpp"
#include "cladapt/features.hpp"
#include "cladapt/lstm.hpp"
#include "cladapt/streams.hpp"
#include "cladapt/synthgen.hpp"

namespace cladapt {

// Simulator knobs beyond the subject profile.
struct SimConfig {
    synthgen::SubjectProfile profile;
    synthgen::BandMixModel mix;
    synthgen::LatentModel latent;
    synthgen::ErrorModel errors;
    double action_period = 2.0;
    double trial_period = 2.0;
    int difficulty = 5;                       // task difficulty level in live runs
    double intervention_effect_secs = 40.0;   // how long a fired intervention steers load
    double haptic_effect_secs = 3.0;          // a vibration pulse is momentary
    std::array<double, 3> class_targets{0.2, 0.5, 0.85};  // dataset generation latent targets
};

struct AppConfig {
    StreamConfig stream;
    FeatureConfig features;
    lstm::TrainConfig model;
    EngineConfig engine;
    SimConfig sim;
    calibration::CalibrationPlan calibration;

    void validate() const;
};

// Strict parse: unknown keys are rejected (Error("unknown_key")), value type
// or range problems raise Error("bad_config_value"). Missing keys keep their
// defaults.
AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::string& path);

// Full round-trippable echo of the effective configuration.
nlohmann::json config_to_json(const AppConfig& cfg);

}  // namespace cladapt
