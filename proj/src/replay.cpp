#include "cladapt/replay.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "cladapt/config.hpp"
#include "cladapt/engine.hpp"
#include "cladapt/errors.hpp"
#include "cladapt/session_log.hpp"

namespace cladapt {

namespace {

using nlohmann::json;

bool close_enough(double a, double b) { return std::abs(a - b) <= 1e-12; }

std::string describe(double t, const std::string& what) {
    return "t=" + std::to_string(t) + ": " + what;
}

bool interventions_match(const Decision& got, const json& logged,
                         std::string& detail) {
    const auto& arr = logged.at("interventions");
    if (arr.size() != got.interventions.size()) {
        detail = "intervention count differs";
        return false;
    }
    for (size_t i = 0; i < got.interventions.size(); ++i) {
        const auto& r = got.interventions[i];
        const auto& j = arr[i];
        if (j.at("kind").get<std::string>() != to_string(r.kind) ||
            j.at("reason").get<std::string>() != r.reason ||
            j.contains("target") != r.target.has_value() ||
            (r.target && j.at("target").get<std::string>() != *r.target)) {
            detail = "intervention " + std::to_string(i) + " differs";
            return false;
        }
    }
    return true;
}

}  // namespace

ReplayReport replay_log(const std::string& log_path,
                        const std::optional<std::string>& model_path, bool print_features) {
    std::ifstream in(log_path);
    if (!in) throw Error("io_error", "cannot open log: " + log_path);

    ReplayReport report;
    std::optional<AppConfig> cfg;
    std::optional<lstm::LoadedModel> model;
    std::optional<DecisionCore> core;
    bool rules_enabled = true;

    std::vector<TaskEvent> pending_events;
    std::optional<lstm::FeatureMatrix> pending_features;
    bool pending_gap = false;
    double pending_t = 0.0;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw Error("bad_log", "line " + std::to_string(line_no) + " is not valid JSON");
        }
        const std::string type = j.at("type").get<std::string>();

        if (type == "meta") {
            cfg = config_from_json(j.at("config"));
            std::string mp = model_path.value_or(
                j.contains("model_path") ? j.at("model_path").get<std::string>() : "");
            if (mp.empty()) throw Error("bad_log", "no model path in meta and none given");
            model = lstm::load_model(mp);
            if (j.contains("policy")) {
                rules_enabled = j.at("policy").get<std::string>() != "static";
            }
            core.emplace(model->params, model->thresholds, cfg->engine);
            continue;
        }
        if (type == "event") {
            pending_events.push_back(event_from_json(j));
            continue;
        }
        if (type == "features") {
            pending_features.emplace();
            for (const auto& row : j.at("frames")) {
                pending_features->push_back(row.get<std::vector<double>>());
            }
            pending_gap = j.at("data_gap").get<bool>();
            pending_t = j.at("t").get<double>();
            if (print_features) std::cout << line << '\n';
            continue;
        }
        if (type != "decision") continue;

        if (!core || !pending_features) {
            throw Error("bad_log", "decision record without meta/features before it");
        }
        ++report.decisions;
        Decision got = core->step(*pending_features, pending_events, pending_t, pending_gap,
                                  rules_enabled);
        pending_features.reset();
        pending_events.clear();

        std::string detail;
        bool ok = true;
        if (!close_enough(got.load, j.at("L").get<double>())) {
            ok = false;
            detail = "L differs";
        } else if (to_string(got.raw_state) != j.at("raw_state").get<std::string>() ||
                   to_string(got.stable_state) != j.at("stable_state").get<std::string>()) {
            ok = false;
            detail = "state differs";
        } else {
            const auto probs = j.at("probs").get<std::vector<double>>();
            for (int k = 0; k < 3; ++k) {
                if (!close_enough(got.probs[k], probs[k])) {
                    ok = false;
                    detail = "probs differ";
                    break;
                }
            }
            if (ok && !interventions_match(got, j, detail)) ok = false;
        }
        if (!ok) {
            ++report.mismatches;
            if (report.details.size() < 20) {
                report.details.push_back(describe(j.at("t").get<double>(), detail));
            }
        }
    }
    return report;
}

}  // namespace cladapt
