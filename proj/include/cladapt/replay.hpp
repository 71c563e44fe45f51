#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cladapt/lstm.hpp"

namespace cladapt {

struct ReplayReport {
    int decisions = 0;
    int mismatches = 0;
    std::vector<std::string> details;  // one line per mismatch, capped
};

// Re-derives every decision from the logged feature sequences and event
// records (through the same DecisionCore the live run used) and compares
// against the logged decisions. `model_path` overrides the path recorded in
// the log's meta record.
ReplayReport replay_log(const std::string& log_path,
                        const std::optional<std::string>& model_path = std::nullopt,
                        bool print_features = false);

}  // namespace cladapt
