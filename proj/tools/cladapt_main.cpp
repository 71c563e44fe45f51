// Command-line surface: calibrate, run, replay, serve, bench, gen.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cladapt/calibration.hpp"
#include "cladapt/config.hpp"
#include "cladapt/errors.hpp"
#include "cladapt/ndjson_server.hpp"
#include "cladapt/replay.hpp"
#include "cladapt/scenario.hpp"
#include "cladapt/session_log.hpp"
#include "cladapt/synthgen.hpp"

namespace {

using cladapt::AppConfig;
using cladapt::Error;
using nlohmann::json;

int classify_exit_code(const std::string& code) {
    if (code == "unknown_key" || code == "bad_config_value" || code == "bad_policy") return 2;
    if (code == "bad_magic" || code == "dim_mismatch" || code == "truncated_file" ||
        code == "trailing_data") {
        return 3;
    }
    return 4;
}

void print_error(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << std::endl;
}

AppConfig config_from_flag(const std::string& path) {
    return path.empty() ? AppConfig{} : cladapt::load_config(path);
}

int cmd_gen(const std::string& config_path, double load, double secs, uint64_t seed,
            std::optional<uint64_t> subject_seed, const std::string& out_path) {
    AppConfig cfg = config_from_flag(config_path);
    if (subject_seed) cfg.sim.profile.seed = *subject_seed;
    if (load < 0.0 || load > 1.0) throw Error("bad_config_value", "--load must lie in [0,1]");
    auto samples = cladapt::synthgen::gen_eeg(load, secs, cfg.sim.profile, seed, cfg.sim.mix,
                                              cfg.stream.sample_rate);
    std::FILE* f = std::fopen(out_path.c_str(), "w");
    if (!f) throw Error("io_error", "cannot open " + out_path);
    std::fputs("t", f);
    for (int c = 1; c <= cladapt::kChannelCount; ++c) std::fprintf(f, ",ch%02d", c);
    std::fputc('\n', f);
    for (const auto& s : samples) {
        std::fprintf(f, "%.9g", s.t);
        for (double v : s.channels) std::fprintf(f, ",%.9g", v);
        std::fputc('\n', f);
    }
    std::fclose(f);
    std::cout << json{{"samples", samples.size()}, {"out", out_path}}.dump() << std::endl;
    return 0;
}

int cmd_calibrate(const std::string& config_path, uint64_t subject_seed,
                  const std::string& out_path, const std::string& log_path) {
    const AppConfig cfg = config_from_flag(config_path);
    cladapt::synthgen::SubjectProfile profile = cfg.sim.profile;
    profile.seed = subject_seed;

    auto result = cladapt::calibration::calibrate_subject(
        profile, cfg.calibration, cfg.stream, cfg.features, cfg.model, subject_seed, cfg.sim.mix,
        cfg.sim.latent, cfg.sim.errors, cfg.engine.fallback_thresholds, cfg.sim.difficulty,
        cfg.sim.trial_period);
    cladapt::lstm::save_model(out_path, result.model.params, result.model.thresholds,
                              result.model.norms);

    if (!log_path.empty()) {
        cladapt::SessionLog log(log_path, "calibrate-seed" + std::to_string(subject_seed),
                                "virtual");
        log.meta(json{{"config", cladapt::config_to_json(cfg)},
                      {"mode", "calibrate"},
                      {"seed", subject_seed},
                      {"model_path", out_path}});
        for (const auto& es : result.history) log.train_epoch(es);
        const double total = cfg.calibration.rest_secs + cfg.calibration.oneback_secs +
                             cfg.calibration.threeback_secs + cfg.calibration.optimal_secs;
        log.calibration_report(total, result.thresholds, result.class_counts,
                               result.model.norms);
    }

    json out{{"T_low", result.thresholds.thresholds.t_low},
             {"T_high", result.thresholds.thresholds.t_high},
             {"calibration_weak", result.thresholds.calibration_weak},
             {"median_L_oneback", result.thresholds.median_oneback},
             {"median_L_threeback", result.thresholds.median_threeback},
             {"epochs_run", result.history.size()},
             {"windows_per_class", result.class_counts},
             {"model", out_path}};
    if (!result.history.empty()) out["val_accuracy"] = result.history.back().val_acc;
    std::cout << out.dump() << std::endl;
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& model_path,
            const std::string& policy_str, double secs, uint64_t seed,
            std::optional<uint64_t> subject_seed, const std::string& log_path) {
    AppConfig cfg = config_from_flag(config_path);
    if (subject_seed) cfg.sim.profile.seed = *subject_seed;
    const auto policy = cladapt::scenario::policy_from_string(policy_str);
    const auto model = cladapt::lstm::load_model(model_path);

    cladapt::SessionLog log(log_path,
                            "run-" + policy_str + "-seed" + std::to_string(seed), "virtual");
    log.meta(json{{"config", cladapt::config_to_json(cfg)},
                  {"mode", "run"},
                  {"model_path", model_path},
                  {"policy", policy_str},
                  {"seed", seed},
                  {"subject_seed", cfg.sim.profile.seed},
                  {"session_secs", secs}});
    const auto stats = cladapt::scenario::run_scenario(model, cfg, policy, secs, seed, &log);

    std::vector<double> lat = stats.latencies_ms;
    std::sort(lat.begin(), lat.end());
    auto pct = [&](double q) {
        if (lat.empty()) return 0.0;
        const double h = q * static_cast<double>(lat.size() - 1);
        const auto lo = static_cast<size_t>(h);
        if (lo + 1 >= lat.size()) return lat.back();
        return lat[lo] + (h - static_cast<double>(lo)) * (lat[lo + 1] - lat[lo]);
    };
    std::cout << json{{"decisions", stats.decisions},
                      {"optimal_fraction", stats.optimal_fraction},
                      {"interventions", stats.interventions_fired},
                      {"latency_p50_ms", pct(0.5)},
                      {"latency_p99_ms", pct(0.99)},
                      {"log", log_path}}
                     .dump()
              << std::endl;
    return 0;
}

int cmd_replay(const std::string& log_path, const std::string& model_path, bool features,
               bool report) {
    std::optional<std::string> model;
    if (!model_path.empty()) model = model_path;
    const auto rep = cladapt::replay_log(log_path, model, features);
    std::cout << rep.mismatches << " mismatches" << std::endl;
    if (report) {
        std::cout << json{{"decisions", rep.decisions},
                          {"mismatches", rep.mismatches},
                          {"details", rep.details}}
                         .dump()
                  << std::endl;
    }
    return rep.mismatches == 0 ? 0 : 4;
}

int cmd_serve(const std::string& config_path, const std::string& model_path, uint16_t port) {
    const AppConfig cfg = config_from_flag(config_path);
    const auto model = cladapt::lstm::load_model(model_path);
    cladapt::NdjsonServer server(model, cfg);
    server.start(port);
    std::cout << json{{"listening", server.port()}}.dump() << std::endl;
    // Foreground service; terminate with a signal.
    while (true) std::this_thread::sleep_for(std::chrono::seconds(1));
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& model_path, int iters,
              uint64_t seed, std::optional<uint64_t> subject_seed) {
    AppConfig cfg = config_from_flag(config_path);
    if (subject_seed) cfg.sim.profile.seed = *subject_seed;
    const auto model = cladapt::lstm::load_model(model_path);
    const auto r = cladapt::scenario::bench_latency(model, cfg, iters, seed);
    std::cout << json{{"iters", r.iters},
                      {"p50_ms", r.p50_ms},
                      {"p95_ms", r.p95_ms},
                      {"p99_ms", r.p99_ms},
                      {"max_ms", r.max_ms},
                      {"mean_ms", r.mean_ms}}
                     .dump()
              << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cognitive-load-adaptive training pipeline"};
    app.require_subcommand(1);

    std::string config_path, model_path, out_path, log_path, policy = "adaptive";
    double load = 0.5, secs = 60.0;
    uint64_t seed = 1, subject_seed_val = 0;
    int iters = 1000;
    uint16_t port = 0;
    bool features = false, report = false;

    auto* gen = app.add_subcommand("gen", "Write synthetic EEG as CSV");
    gen->add_option("--config", config_path);
    gen->add_option("--load", load, "latent load in [0,1]")->required();
    gen->add_option("--secs", secs)->required();
    gen->add_option("--seed", seed)->required();
    auto* gen_subject = gen->add_option("--subject-seed", subject_seed_val);
    gen->add_option("--out", out_path)->required();

    auto* calibrate = app.add_subcommand("calibrate", "Run calibration and train a model");
    calibrate->add_option("--config", config_path);
    calibrate->add_option("--subject-seed", seed)->required();
    calibrate->add_option("--out", out_path)->required();
    calibrate->add_option("--log", log_path);

    auto* run = app.add_subcommand("run", "Simulated closed-loop session");
    run->add_option("--config", config_path);
    run->add_option("--model", model_path)->required();
    run->add_option("--policy", policy)->check(CLI::IsMember({"static", "adaptive"}));
    run->add_option("--secs", secs)->required();
    run->add_option("--seed", seed)->required();
    auto* run_subject = run->add_option("--subject-seed", subject_seed_val);
    run->add_option("--log", log_path)->required();

    auto* replay = app.add_subcommand("replay", "Re-derive decisions from a session log");
    replay->add_option("--log", log_path)->required();
    replay->add_option("--model", model_path);
    replay->add_flag("--features", features);
    replay->add_flag("--report", report);

    auto* serve = app.add_subcommand("serve", "NDJSON/TCP inference service");
    serve->add_option("--config", config_path);
    serve->add_option("--model", model_path)->required();
    serve->add_option("--port", port)->required();

    auto* bench = app.add_subcommand("bench", "Tick latency distribution");
    bench->add_option("--config", config_path);
    bench->add_option("--model", model_path)->required();
    bench->add_option("--iters", iters);
    bench->add_option("--seed", seed);
    auto* bench_subject = bench->add_option("--subject-seed", subject_seed_val);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        print_error("usage", e.what());
        return 1;
    }

    auto opt_subject = [&](CLI::Option* o) -> std::optional<uint64_t> {
        if (o->count() > 0) return subject_seed_val;
        return std::nullopt;
    };

    try {
        if (gen->parsed()) {
            return cmd_gen(config_path, load, secs, seed, opt_subject(gen_subject), out_path);
        }
        if (calibrate->parsed()) return cmd_calibrate(config_path, seed, out_path, log_path);
        if (run->parsed()) {
            return cmd_run(config_path, model_path, policy, secs, seed, opt_subject(run_subject),
                           log_path);
        }
        if (replay->parsed()) return cmd_replay(log_path, model_path, features, report);
        if (serve->parsed()) return cmd_serve(config_path, model_path, port);
        if (bench->parsed()) {
            return cmd_bench(config_path, model_path, iters, seed, opt_subject(bench_subject));
        }
    } catch (const Error& e) {
        print_error(e.code(), e.what());
        return classify_exit_code(e.code());
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 4;
    }
    return 1;
}
