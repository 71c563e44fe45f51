#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "cladapt/calibration.hpp"
#include "cladapt/engine.hpp"
#include "cladapt/features.hpp"
#include "cladapt/streams.hpp"

namespace cladapt {

// JSON encodings shared by the session log and the wire protocol.
nlohmann::json event_to_json(const TaskEvent& e);
TaskEvent event_from_json(const nlohmann::json& j);
nlohmann::json intervention_to_json(const InterventionRecord& r);

// Append-only JSONL sink. Every record carries "type", "t" and "session_id";
// the meta record declares whether "t" is virtual or wall time. On the
// virtual clock, decision latencies are logged as 0 so logs stay
// byte-reproducible; measured latencies are reported out of band.
class SessionLog {
public:
    SessionLog(const std::string& path, std::string session_id, std::string clock_domain);
    ~SessionLog();

    void write(double t, const std::string& type, nlohmann::json fields);

    void meta(nlohmann::json extra);
    void event(const TaskEvent& e);
    void eeg_summary(double t, const AlignedWindow& w, const FeatureDiagnostics& diag);
    void features(const FeatureSequence& seq, bool data_gap);
    void decision(const Decision& d, std::optional<double> latent_load);
    void calibration_report(double t, const calibration::ThresholdResult& th,
                            const std::array<int, 3>& class_counts, const NormStats& norms);
    void train_epoch(const lstm::EpochStats& stats);

    const std::string& session_id() const { return session_id_; }
    bool virtual_clock() const { return clock_domain_ == "virtual"; }

private:
    std::ofstream out_;
    std::string session_id_;
    std::string clock_domain_;
};

}  // namespace cladapt
