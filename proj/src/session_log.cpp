#include "cladapt/session_log.hpp"

#include "cladapt/errors.hpp"

namespace cladapt {

using nlohmann::json;

json event_to_json(const TaskEvent& e) {
    json j{{"t", e.t},
           {"kind", to_string(e.kind)},
           {"step", e.step_id},
           {"module", e.module_id},
           {"difficulty", e.difficulty}};
    if (e.error_type) j["error_type"] = to_string(*e.error_type);
    if (e.object_ok) j["object_ok"] = *e.object_ok;
    return j;
}

TaskEvent event_from_json(const json& j) {
    TaskEvent e;
    e.t = j.at("t").get<double>();
    const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error("bad_event", "unknown event kind");
    e.kind = *kind;
    e.step_id = j.at("step").get<int>();
    e.module_id = j.at("module").get<int>();
    if (j.contains("difficulty")) e.difficulty = j.at("difficulty").get<int>();
    if (j.contains("error_type") && !j.at("error_type").is_null()) {
        const auto et = error_type_from_string(j.at("error_type").get<std::string>());
        if (!et) throw Error("bad_event", "unknown error type");
        e.error_type = et;
    }
    if (j.contains("object_ok") && !j.at("object_ok").is_null()) {
        e.object_ok = j.at("object_ok").get<bool>();
    }
    return e;
}

json intervention_to_json(const InterventionRecord& r) {
    json j{{"kind", to_string(r.kind)}, {"reason", r.reason}};
    if (r.target) j["target"] = *r.target;
    return j;
}

SessionLog::SessionLog(const std::string& path, std::string session_id, std::string clock_domain)
    : out_(path, std::ios::trunc),
      session_id_(std::move(session_id)),
      clock_domain_(std::move(clock_domain)) {
    if (!out_) throw Error("io_error", "cannot open session log for writing: " + path);
}

SessionLog::~SessionLog() = default;

void SessionLog::write(double t, const std::string& type, json fields) {
    fields["type"] = type;
    fields["t"] = t;
    fields["session_id"] = session_id_;
    out_ << fields.dump() << '\n';
    out_.flush();
}

void SessionLog::meta(json extra) {
    extra["clock"] = clock_domain_;
    write(0.0, "meta", std::move(extra));
}

void SessionLog::event(const TaskEvent& e) {
    write(e.t, "event", event_to_json(e));
}

void SessionLog::eeg_summary(double t, const AlignedWindow& w, const FeatureDiagnostics& diag) {
    json j{{"rows", w.eeg.size()},
           {"dropped_samples", w.dropped_samples},
           {"error_count", w.error_count},
           {"step_elapsed", w.step_elapsed},
           {"difficulty", w.difficulty},
           {"ch_theta", diag.theta},
           {"ch_alpha", diag.alpha},
           {"ch_beta", diag.beta},
           {"ch_gamma", diag.gamma}};
    write(t, "eeg_summary", std::move(j));
}

void SessionLog::features(const FeatureSequence& seq, bool data_gap) {
    json frames = json::array();
    for (const auto& f : seq.frames) frames.push_back(f);
    write(seq.t_close, "features", json{{"frames", std::move(frames)}, {"data_gap", data_gap}});
}

void SessionLog::decision(const Decision& d, std::optional<double> latent_load) {
    json interventions = json::array();
    for (const auto& r : d.interventions) interventions.push_back(intervention_to_json(r));
    json suppressed = json::array();
    for (const auto& s : d.suppressed) {
        suppressed.push_back(json{{"kind", to_string(s.kind)}, {"reason", s.reason}});
    }
    json j{{"L", d.load},
           {"probs", d.probs},
           {"raw_state", to_string(d.raw_state)},
           {"stable_state", to_string(d.stable_state)},
           {"interventions", std::move(interventions)},
           {"suppressed", std::move(suppressed)},
           {"latency_ms", virtual_clock() ? 0.0 : d.latency_ms},
           {"data_gap", d.data_gap}};
    if (latent_load) j["latent_l"] = *latent_load;
    write(d.t, "decision", std::move(j));
}

void SessionLog::calibration_report(double t, const calibration::ThresholdResult& th,
                                    const std::array<int, 3>& class_counts,
                                    const NormStats& norms) {
    write(t, "calibration_report",
          json{{"T_low", th.thresholds.t_low},
               {"T_high", th.thresholds.t_high},
               {"calibration_weak", th.calibration_weak},
               {"median_L_oneback", th.median_oneback},
               {"median_L_threeback", th.median_threeback},
               {"class_counts", class_counts},
               {"norm_mean", norms.mean},
               {"norm_std", norms.stddev}});
}

void SessionLog::train_epoch(const lstm::EpochStats& stats) {
    write(0.0, "train_epoch",
          json{{"epoch", stats.epoch},
               {"train_loss", stats.train_loss},
               {"val_loss", stats.val_loss},
               {"train_acc", stats.train_acc},
               {"val_acc", stats.val_acc}});
}

}  // namespace cladapt
