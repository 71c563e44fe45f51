// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] is the path to the CLI binary (used by the criteria that
// exercise the command-line surface).

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cladapt/calibration.hpp"
#include "cladapt/config.hpp"
#include "cladapt/engine.hpp"
#include "cladapt/features.hpp"
#include "cladapt/lstm.hpp"
#include "cladapt/replay.hpp"
#include "cladapt/rng.hpp"
#include "cladapt/scenario.hpp"
#include "cladapt/session_log.hpp"

using namespace cladapt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string g_cli;
fs::path g_dir;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = g_cli + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    CliResult r;
    if (!pipe) return r;
    char buf[4096];
    while (fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

json last_json_line(const std::string& text) {
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    return json::parse(last);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

// ---------------------------------------------------------------- criterion 1

Outcome spectral_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const double freqs[] = {5.0, 10.0, 20.0, 40.0};
    const double amps[] = {1.0, 10.0, 50.0};
    Rng rng(2024);
    const BandDefs defs;

    for (int trial = 0; trial < 20; ++trial) {
        const double f = freqs[rng.uniform_u64(4)];
        const double a = amps[rng.uniform_u64(3)];
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        std::vector<double> x(128);
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] = a * std::sin(2.0 * M_PI * f * static_cast<double>(i) / 128.0 + phase);
        }
        const Psd p = psd(x, 128.0);
        const Psd oracle = psd_direct(x, 128.0);

        double max_rel = 0.0;
        double peak = 0.0;
        for (double v : oracle.power) peak = std::max(peak, v);
        for (size_t k = 0; k < p.power.size(); ++k) {
            max_rel = std::max(max_rel, std::abs(p.power[k] - oracle.power[k]) / peak);
        }
        if (max_rel > 1e-9) {
            return {false, "fft deviates from direct DFT by " + std::to_string(max_rel)};
        }

        const double total = p.total_power();
        const double expected = a * a / 2.0;
        if (std::abs(total - expected) > 0.05 * expected) {
            return {false, "total power off at f=" + std::to_string(f)};
        }
        const BandPowers bp = band_powers(p, defs);
        double owner = 0.0;
        if (f == 5.0) owner = bp.theta;
        if (f == 10.0) owner = bp.alpha;
        if (f == 20.0) owner = bp.beta;
        if (f == 40.0) owner = bp.gamma;
        if (owner < 0.95 * total) {
            return {false, "band capture below 95% at f=" + std::to_string(f)};
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 5.0) return {false, "runtime " + std::to_string(secs) + " s >= 5 s"};
    char buf[96];
    std::snprintf(buf, sizeof buf, "20 sinusoids routed and Parseval-checked in %.2f s", secs);
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 2

double check_gradients(const lstm::ModelParams& params, const std::vector<lstm::Sample>& batch,
                       int coords_per_tensor, Rng& rng) {
    lstm::BatchResult br = lstm::backward(batch, params, 0);
    auto loss_at = [&](const lstm::ModelParams& p) {
        double total = 0.0;
        for (const auto& s : batch) {
            total += lstm::cross_entropy(lstm::forward(s.x, p, lstm::RunMode::eval), s.label);
        }
        return total / static_cast<double>(batch.size());
    };

    lstm::ModelParams work = params;
    std::vector<std::vector<double>*> pt;
    work.for_each_tensor([&](std::vector<double>& t) { pt.push_back(&t); });
    std::vector<const std::vector<double>*> gt;
    br.grads.for_each_tensor([&](const std::vector<double>& t) { gt.push_back(&t); });

    const double h = 1e-5;
    double worst = 0.0;
    for (size_t ti = 0; ti < pt.size(); ++ti) {
        std::vector<size_t> coords;
        const size_t n = pt[ti]->size();
        if (coords_per_tensor <= 0 || static_cast<size_t>(coords_per_tensor) >= n) {
            coords.resize(n);
            for (size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < coords_per_tensor; ++i) {
                coords.push_back(rng.uniform_u64(n));
            }
        }
        for (size_t k : coords) {
            double& v = (*pt[ti])[k];
            const double orig = v;
            v = orig + h;
            const double up = loss_at(work);
            v = orig - h;
            const double down = loss_at(work);
            v = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = (*gt[ti])[k];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

Outcome gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(7);
    double worst = 0.0;

    for (uint64_t seed = 0; seed < 100; ++seed) {
        lstm::ModelParams p = lstm::init_params(3, 4, 0.0, 9000 + seed);
        Rng jitter(seed);
        p.for_each_tensor([&](std::vector<double>& t) {
            for (double& v : t) v += jitter.uniform(-0.3, 0.3);
        });
        std::vector<lstm::Sample> batch;
        lstm::FeatureMatrix x(2, std::vector<double>(3));
        for (auto& row : x) {
            for (double& v : row) v = jitter.uniform(-1.5, 1.5);
        }
        batch.push_back({x, static_cast<int>(seed % 3)});
        worst = std::max(worst, check_gradients(p, batch, 0, rng));
    }

    for (uint64_t seed = 0; seed < 10; ++seed) {
        lstm::ModelParams p = lstm::init_params(8, 64, 0.0, 9500 + seed);
        Rng jitter(200 + seed);
        std::vector<lstm::Sample> batch;
        lstm::FeatureMatrix x(5, std::vector<double>(8));
        for (auto& row : x) {
            for (double& v : row) v = jitter.uniform(-1.5, 1.5);
        }
        batch.push_back({x, static_cast<int>(seed % 3)});
        worst = std::max(worst, check_gradients(p, batch, 30, rng));
    }

    const double secs = seconds_since(t0);
    if (worst >= 1e-4) return {false, "max relative gradient error " + std::to_string(worst)};
    if (secs >= 60.0) return {false, "runtime " + std::to_string(secs) + " s >= 60 s"};
    char buf[128];
    std::snprintf(buf, sizeof buf, "max rel err %.2e over 110 models in %.1f s", worst, secs);
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 3

// Independent check of separability: multinomial logistic regression on the
// per-sample mean feature vector, trained with plain gradient descent.
double linear_oracle_accuracy(const std::vector<lstm::Sample>& train,
                              const std::vector<lstm::Sample>& val) {
    auto mean_features = [](const lstm::Sample& s) {
        std::array<double, kFeatureCount> m{};
        for (const auto& row : s.x) {
            for (int i = 0; i < kFeatureCount; ++i) m[i] += row[i];
        }
        for (double& v : m) v /= static_cast<double>(s.x.size());
        return m;
    };
    std::array<std::array<double, kFeatureCount>, 3> w{};
    std::array<double, 3> b{};
    auto logits_of = [&](const std::array<double, kFeatureCount>& f) {
        std::array<double, 3> z = b;
        for (int k = 0; k < 3; ++k) {
            for (int i = 0; i < kFeatureCount; ++i) z[k] += w[k][i] * f[i];
        }
        return z;
    };
    auto softmax = [](std::array<double, 3> z) {
        const double m = std::max({z[0], z[1], z[2]});
        double sum = 0.0;
        for (double& v : z) {
            v = std::exp(v - m);
            sum += v;
        }
        for (double& v : z) v /= sum;
        return z;
    };

    std::vector<std::array<double, kFeatureCount>> feats;
    feats.reserve(train.size());
    for (const auto& s : train) feats.push_back(mean_features(s));

    const double lr = 0.5;
    for (int epoch = 0; epoch < 500; ++epoch) {
        std::array<std::array<double, kFeatureCount>, 3> gw{};
        std::array<double, 3> gb{};
        for (size_t n = 0; n < train.size(); ++n) {
            auto probs = softmax(logits_of(feats[n]));
            for (int k = 0; k < 3; ++k) {
                const double d = probs[k] - (train[n].label == k ? 1.0 : 0.0);
                gb[k] += d;
                for (int i = 0; i < kFeatureCount; ++i) gw[k][i] += d * feats[n][i];
            }
        }
        for (int k = 0; k < 3; ++k) {
            b[k] -= lr * gb[k] / static_cast<double>(train.size());
            for (int i = 0; i < kFeatureCount; ++i) {
                w[k][i] -= lr * gw[k][i] / static_cast<double>(train.size());
            }
        }
    }
    int hits = 0;
    for (const auto& s : val) {
        const auto probs = softmax(logits_of(mean_features(s)));
        const int arg = static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                         probs.begin());
        if (arg == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(val.size());
}

Outcome classifier_learnability() {
    const auto t0 = std::chrono::steady_clock::now();
    AppConfig cfg;
    auto dataset = scenario::make_labeled_dataset(cfg, 200, 1000);

    // Stratified 80/20 split shared by the model and the oracle.
    Rng rng(55);
    std::array<std::vector<lstm::Sample>, 3> by_class;
    for (auto& s : dataset) by_class[s.label].push_back(std::move(s));
    std::vector<lstm::Sample> train, val;
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (size_t i = 0; i < members.size(); ++i) {
            (i < members.size() / 5 ? val : train).push_back(std::move(members[i]));
        }
    }
    rng.shuffle(train);

    lstm::TrainConfig tcfg;
    tcfg.seed = 11;
    lstm::TrainResult tr = lstm::train_split(train, val, tcfg);
    int hits = 0;
    for (const auto& s : val) {
        const auto probs = lstm::forward(s.x, tr.params, lstm::RunMode::eval);
        const int arg = static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                         probs.begin());
        if (arg == s.label) ++hits;
    }
    const double lstm_acc = static_cast<double>(hits) / static_cast<double>(val.size());
    const double oracle_acc = linear_oracle_accuracy(train, val);
    const double secs = seconds_since(t0);

    char buf[160];
    std::snprintf(buf, sizeof buf, "lstm val acc %.3f, linear oracle %.3f, %.0f s", lstm_acc,
                  oracle_acc, secs);
    if (lstm_acc < 0.90) return {false, std::string("lstm accuracy below 0.90: ") + buf};
    if (oracle_acc < 0.85) return {false, std::string("oracle below 0.85: ") + buf};
    if (secs >= 300.0) return {false, std::string("runtime over 5 min: ") + buf};
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 4

Outcome calibration_contract() {
    AppConfig cfg;
    int valid = 0, separated = 0;
    const int runs = 100;
    for (int s = 1; s <= runs; ++s) {
        synthgen::SubjectProfile prof = cfg.sim.profile;
        prof.seed = static_cast<uint64_t>(s);
        auto r = calibration::calibrate_subject(
            prof, cfg.calibration, cfg.stream, cfg.features, cfg.model,
            static_cast<uint64_t>(s), cfg.sim.mix, cfg.sim.latent, cfg.sim.errors,
            cfg.engine.fallback_thresholds, cfg.sim.difficulty, cfg.sim.trial_period);
        if (r.thresholds.thresholds.valid()) ++valid;
        if (r.thresholds.median_threeback > r.thresholds.median_oneback) ++separated;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "valid thresholds %d/%d, median separation %d/%d", valid,
                  runs, separated, runs);
    if (valid != runs) return {false, buf};
    if (separated < 95) return {false, buf};
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 5

Outcome latency_budget(const fs::path& model_path) {
    const auto r = run_cli("bench --model " + model_path.string() +
                           " --iters 1000 --seed 3 --subject-seed 42");
    if (r.exit_code != 0) return {false, "bench failed: " + r.output};
    const json j = last_json_line(r.output);
    const double p50 = j.at("p50_ms").get<double>();
    const double p99 = j.at("p99_ms").get<double>();
    char buf[128];
    std::snprintf(buf, sizeof buf, "1000 cycles: p50 %.2f ms, p99 %.2f ms", p50, p99);
    if (p99 >= 100.0 || p50 >= 20.0) return {false, buf};
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 6

Outcome geometry(const lstm::LoadedModel& model, std::vector<fs::path>& logs) {
    AppConfig cfg;
    cfg.sim.profile.seed = 42;
    const fs::path log_path = g_dir / "geometry.jsonl";
    SessionLog log(log_path.string(), "geometry", "virtual");
    log.meta({{"config", config_to_json(cfg)},
              {"model_path", (g_dir / "model.bin").string()},
              {"policy", "adaptive"}});
    const auto stats =
        scenario::run_scenario(model, cfg, scenario::Policy::adaptive, 300.0, 5, &log);
    logs.push_back(log_path);

    if (stats.decisions != 30) {
        return {false, "expected 30 decisions, got " + std::to_string(stats.decisions)};
    }
    for (size_t rows : stats.window_rows) {
        if (rows != 256) return {false, "window with " + std::to_string(rows) + " rows"};
    }
    return {true, "300 s session: 30 decisions, every window 256x14"};
}

// ---------------------------------------------------------------- criterion 7

lstm::ModelParams forced_model(LoadState s) {
    lstm::ModelParams p;
    p.layer1.resize(kFeatureCount, 4);
    p.layer2.resize(4, 4);
    p.w_out.assign(3 * 4, 0.0);
    p.b_out.assign(3, 0.0);
    p.b_out[static_cast<int>(s)] = 30.0;
    return p;
}

Outcome rule_table() {
    const LoadState states[] = {LoadState::low, LoadState::optimal, LoadState::high};
    const int confusions[] = {0, 1, 2, 3};  // where, how, why, none
    int combos = 0;

    for (LoadState state : states) {
        for (int conf : confusions) {
            for (int grab = 0; grab <= 1; ++grab) {
                for (int rep = 0; rep <= 1; ++rep) {
                    if (conf == 3 && rep == 1) continue;  // repetition implies a recent error
                    ++combos;

                    std::vector<TaskEvent> events;
                    auto push = [&](double t, EventKind kind, int step,
                                    std::optional<ErrorType> et = std::nullopt,
                                    std::optional<bool> ok = std::nullopt) {
                        TaskEvent e;
                        e.t = t;
                        e.kind = kind;
                        e.step_id = step;
                        e.module_id = step <= 4 ? 1 : 2;
                        e.difficulty = 3;
                        e.error_type = et;
                        e.object_ok = ok;
                        events.push_back(e);
                    };
                    if (rep) {
                        push(1.0, EventKind::hint_shown, 4);
                        push(2.0, EventKind::error, 4, ErrorType::how);
                        push(3.0, EventKind::error, 4, ErrorType::how);
                    }
                    if (grab) push(8.0, EventKind::object_grab, 3, std::nullopt, false);
                    if (conf < 3) {
                        push(9.0, EventKind::error, 2, static_cast<ErrorType>(conf));
                    }

                    std::set<InterventionKind> expected;
                    if (grab) expected.insert(InterventionKind::haptic_pulse);
                    if (rep) expected.insert(InterventionKind::ghost_hand);
                    if (state == LoadState::high) {
                        switch (conf) {
                            case 0: expected.insert(InterventionKind::arrow_cue); break;
                            case 1: expected.insert(InterventionKind::ghost_hand); break;
                            case 2: expected.insert(InterventionKind::voice_explanation); break;
                            case 3:
                                expected.insert(InterventionKind::simplify_interface);
                                expected.insert(InterventionKind::slow_progression);
                                break;
                        }
                    } else if (state == LoadState::low) {
                        expected.insert(InterventionKind::error_injection);  // rotation head
                    }

                    auto model = forced_model(state);
                    DecisionCore core(model, Thresholds{0.33, 0.66}, EngineConfig{});
                    lstm::FeatureMatrix feats(5, std::vector<double>(kFeatureCount, 0.0));
                    Decision d = core.step(feats, events, 10.0, false);

                    std::set<InterventionKind> actual;
                    for (const auto& iv : d.interventions) actual.insert(iv.kind);
                    if (actual != expected) {
                        std::string detail = "mismatch at state=" + to_string(state) +
                                             " conf=" + std::to_string(conf) +
                                             " grab=" + std::to_string(grab) +
                                             " rep=" + std::to_string(rep) + "; got {";
                        for (auto k : actual) detail += to_string(k) + " ";
                        detail += "} want {";
                        for (auto k : expected) detail += to_string(k) + " ";
                        detail += "}";
                        return {false, detail};
                    }
                }
            }
        }
    }
    return {true, std::to_string(combos) + " constructible combinations match the mapping"};
}

// ---------------------------------------------------------------- criterion 8

Outcome closed_loop_benefit(const lstm::LoadedModel& model, std::vector<fs::path>& logs) {
    const auto t0 = std::chrono::steady_clock::now();
    AppConfig cfg;
    cfg.sim.profile.seed = 42;
    double sum_adaptive = 0.0, sum_static = 0.0;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        for (const auto policy :
             {scenario::Policy::adaptive, scenario::Policy::static_policy}) {
            const std::string name =
                scenario::to_string(policy) + "-" + std::to_string(seed);
            const fs::path log_path = g_dir / ("loop-" + name + ".jsonl");
            SessionLog log(log_path.string(), "loop-" + name, "virtual");
            log.meta({{"config", config_to_json(cfg)},
                      {"model_path", (g_dir / "model.bin").string()},
                      {"policy", scenario::to_string(policy)}});
            const auto stats = scenario::run_scenario(model, cfg, policy, 600.0, seed, &log);
            logs.push_back(log_path);
            (policy == scenario::Policy::adaptive ? sum_adaptive : sum_static) +=
                stats.optimal_fraction;
        }
    }
    const double mean_adaptive = sum_adaptive / 10.0;
    const double mean_static = sum_static / 10.0;
    const double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "optimal-zone time: adaptive %.3f vs static %.3f (+%.1f points), %.0f s",
                  mean_adaptive, mean_static, 100.0 * (mean_adaptive - mean_static), secs);
    if (mean_adaptive - mean_static < 0.20) return {false, buf};
    if (secs >= 120.0) return {false, std::string("runtime over 2 min: ") + buf};
    return {true, buf};
}

// ---------------------------------------------------------------- criterion 9

Outcome determinism_and_replay(const fs::path& model_path, std::vector<fs::path>& logs) {
    // Byte-identical logs from identical argv.
    const fs::path log_a = g_dir / "det_a.jsonl";
    const fs::path log_b = g_dir / "det_b.jsonl";
    const std::string common = "run --model " + model_path.string() +
                               " --policy adaptive --secs 120 --seed 77 --subject-seed 42";
    auto ra = run_cli(common + " --log " + log_a.string());
    auto rb = run_cli(common + " --log " + log_b.string());
    if (ra.exit_code != 0 || rb.exit_code != 0) return {false, "run failed"};
    if (read_file(log_a) != read_file(log_b)) return {false, "logs differ between runs"};
    logs.push_back(log_a);

    // CSV export determinism.
    const fs::path csv_a = g_dir / "gen_a.csv";
    const fs::path csv_b = g_dir / "gen_b.csv";
    const std::string gen_args = "gen --load 0.6 --secs 2 --seed 5 --subject-seed 42 --out ";
    if (run_cli(gen_args + csv_a.string()).exit_code != 0) return {false, "gen failed"};
    if (run_cli(gen_args + csv_b.string()).exit_code != 0) return {false, "gen failed"};
    if (read_file(csv_a) != read_file(csv_b)) return {false, "gen CSVs differ"};

    // Replay closure over every log this suite produced.
    int replayed = 0;
    for (const fs::path& log : logs) {
        const auto r = run_cli("replay --log " + log.string() + " --model " +
                               model_path.string());
        if (r.exit_code != 0 || r.output.find("0 mismatches") == std::string::npos) {
            return {false, "replay mismatch in " + log.filename().string() + ": " + r.output};
        }
        ++replayed;
    }
    return {true, "byte-identical reruns; " + std::to_string(replayed) +
                      " logs replayed with 0 mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
    g_cli = argc > 1 ? argv[1] : "./cladapt";
    g_dir = fs::temp_directory_path() /
            ("cladapt_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(g_dir);

    // A calibrated model shared by the CLI-facing criteria.
    const fs::path model_path = g_dir / "model.bin";
    {
        const auto r = run_cli("calibrate --subject-seed 42 --out " + model_path.string());
        if (r.exit_code != 0) {
            std::cerr << "FATAL: calibrate failed: " << r.output << "\n";
            return 1;
        }
    }
    const lstm::LoadedModel model = lstm::load_model(model_path.string());
    std::vector<fs::path> logs;

    struct Criterion {
        const char* name;
        Outcome outcome;
    };
    std::vector<Criterion> results;
    results.push_back({"1 spectral-oracle", spectral_oracle()});
    results.push_back({"2 gradient-check", gradient_check()});
    results.push_back({"3 classifier-learnability", classifier_learnability()});
    results.push_back({"4 calibration-contract", calibration_contract()});
    results.push_back({"5 latency-budget", latency_budget(model_path)});
    results.push_back({"6 cadence-geometry", geometry(model, logs)});
    results.push_back({"7 rule-table", rule_table()});
    results.push_back({"8 closed-loop-benefit", closed_loop_benefit(model, logs)});
    results.push_back({"9 determinism-replay", determinism_and_replay(model_path, logs)});

    bool all_pass = true;
    for (const auto& c : results) {
        std::cout << (c.outcome.pass ? "PASS" : "FAIL") << "  criterion " << c.name << ": "
                  << c.outcome.detail << "\n";
        if (!c.outcome.pass) all_pass = false;
    }
    std::error_code ec;
    fs::remove_all(g_dir, ec);
    return all_pass ? 0 : 1;
}
