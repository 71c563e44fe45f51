#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cladapt/config.hpp"
#include "cladapt/engine.hpp"
#include "cladapt/lstm.hpp"
#include "cladapt/session_log.hpp"

namespace cladapt {
namespace scenario {

enum class Policy { static_policy, adaptive };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);

struct ScenarioStats {
    int decisions = 0;
    double optimal_fraction = 0.0;   // ground-truth latent load in (0.33, 0.66)
    std::vector<double> latencies_ms;
    std::vector<size_t> window_rows;
    std::array<int, 3> stable_counts{};
    int interventions_fired = 0;
};

// Full closed loop on the virtual clock: synthetic EEG and task events feed
// the engine; under the adaptive policy decisions steer the latent load,
// under the static policy they are recorded but never acted on.
ScenarioStats run_scenario(const lstm::LoadedModel& model, const AppConfig& cfg, Policy policy,
                           double session_secs, uint64_t seed, SessionLog* log = nullptr);

// Labeled windows for classifier evaluation: `per_class` windows per class,
// generated at the sim's class latent targets with per-segment random
// difficulty so the label never leaks through that feature.
std::vector<lstm::Sample> make_labeled_dataset(const AppConfig& cfg, int per_class,
                                               uint64_t seed);

struct BenchReport {
    int iters = 0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    double max_ms = 0.0;
    double mean_ms = 0.0;
};

// Latency of the full tick cycle (window close -> decision) over `iters`
// cadence ticks of streamed synthetic EEG.
BenchReport bench_latency(const lstm::LoadedModel& model, const AppConfig& cfg, int iters,
                          uint64_t seed);

}  // namespace scenario
}  // namespace cladapt
