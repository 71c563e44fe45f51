#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "cladapt/calibration.hpp"
#include "cladapt/config.hpp"
#include "cladapt/ndjson_server.hpp"
#include "cladapt/replay.hpp"
#include "cladapt/scenario.hpp"
#include "cladapt/session_log.hpp"

using namespace cladapt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Minimal blocking NDJSON client for server tests.
class LineClient {
public:
    explicit LineClient(uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(fd_ >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
        timeval tv{5, 0};
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    }
    ~LineClient() {
        if (fd_ >= 0) ::close(fd_);
    }

    void send_line(const std::string& line) {
        std::string data = line + "\n";
        size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, 0);
            REQUIRE(n > 0);
            off += static_cast<size_t>(n);
        }
    }

    // Blocks (with timeout) until a full line arrives.
    std::optional<std::string> read_line() {
        while (true) {
            const size_t pos = buffer_.find('\n');
            if (pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return line;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n <= 0) return std::nullopt;
            buffer_.append(chunk, static_cast<size_t>(n));
        }
    }

private:
    int fd_ = -1;
    std::string buffer_;
};

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

lstm::LoadedModel tiny_model(uint64_t seed = 1) {
    return {lstm::init_params(kFeatureCount, 8, 0.2, seed), Thresholds{0.33, 0.66},
            NormStats::identity()};
}

std::string eeg_line(double t, double value = 5.0) {
    json j{{"type", "eeg"}, {"t", t}, {"ch", std::vector<double>(kChannelCount, value)}};
    return j.dump();
}

}  // namespace

TEST_CASE("config parses defaults and round-trips") {
    AppConfig def;
    const json echo = config_to_json(def);
    AppConfig back = config_from_json(echo);
    CHECK(back.stream.sample_rate == def.stream.sample_rate);
    CHECK(back.stream.cadence == def.stream.cadence);
    CHECK(back.features.bands.theta.lo == def.features.bands.theta.lo);
    CHECK(back.model.hidden == def.model.hidden);
    CHECK(back.model.adam.lr == def.model.adam.lr);
    CHECK(back.engine.cooldown_secs == def.engine.cooldown_secs);
    CHECK(back.sim.profile.skill == def.sim.profile.skill);
    CHECK(back.calibration.rest_secs == def.calibration.rest_secs);
}

TEST_CASE("config rejects unknown keys at every level") {
    CHECK_THROWS_AS(config_from_json(json{{"streem", json::object()}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"stream", {{"sample_rrate", 128}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"sim", {{"couplings", {{"k_gamma", 1.0}}}}}}),
                    Error);
    // Well-formed override passes and applies.
    AppConfig cfg = config_from_json(json{{"stream", {{"cadence", 5.0}}}});
    CHECK(cfg.stream.cadence == 5.0);
    CHECK(cfg.stream.sample_rate == 128.0);  // untouched default
}

TEST_CASE("config rejects wrong types and bad values") {
    CHECK_THROWS_AS(config_from_json(json{{"stream", {{"cadence", "fast"}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"stream", {{"cadence", -1.0}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"model", {{"dropout", 1.5}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"model", {{"layers", 3}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"engine", {{"fallback_thresholds", {0.9, 0.1}}}}}),
                    Error);
}

TEST_CASE("task event JSON encoding round-trips") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        TaskEvent e;
        e.t = rng.uniform(0.0, 100.0);
        e.kind = static_cast<EventKind>(rng.uniform_u64(6));
        e.step_id = 1 + static_cast<int>(rng.uniform_u64(8));
        e.module_id = e.step_id <= 4 ? 1 : 2;
        e.difficulty = 1 + static_cast<int>(rng.uniform_u64(5));
        if (e.kind == EventKind::error) {
            e.error_type = static_cast<ErrorType>(rng.uniform_u64(3));
        }
        if (e.kind == EventKind::object_grab) e.object_ok = rng.bernoulli(0.5);
        TaskEvent back = event_from_json(event_to_json(e));
        CHECK(back.t == e.t);
        CHECK(back.kind == e.kind);
        CHECK(back.step_id == e.step_id);
        CHECK(back.module_id == e.module_id);
        CHECK(back.difficulty == e.difficulty);
        CHECK(back.error_type == e.error_type);
        CHECK(back.object_ok == e.object_ok);
    }
}

TEST_CASE("session log lines carry the required schema") {
    const auto path = temp_path("cladapt_schema.jsonl");
    {
        SessionLog log(path, "schema-test", "virtual");
        log.meta({{"config", config_to_json(AppConfig{})}, {"model_path", "m.bin"}});
        TaskEvent e;
        e.t = 3.0;
        e.kind = EventKind::error;
        e.error_type = ErrorType::why;
        log.event(e);
        Decision d;
        d.t = 10.0;
        d.load = 0.4;
        d.probs = {0.2, 0.5, 0.3};
        d.raw_state = LoadState::optimal;
        d.stable_state = LoadState::optimal;
        d.latency_ms = 1.5;
        d.interventions.push_back(
            {InterventionKind::arrow_cue, std::string("step:1"), "test"});
        log.decision(d, 0.44);
        log.train_epoch({2, 0.5, 0.6, 0.9, 0.85});
    }
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        const json j = json::parse(line);  // every line standalone JSON
        CHECK(j.contains("type"));
        CHECK(j.contains("t"));
        CHECK(j.at("session_id") == "schema-test");
        if (j.at("type") == "decision") {
            for (const char* key : {"L", "probs", "raw_state", "stable_state", "interventions",
                                    "latency_ms", "latent_l"}) {
                CHECK(j.contains(key));
            }
            CHECK(j.at("latency_ms") == 0.0);  // virtual clock
            CHECK(j.at("interventions")[0].at("kind") == "arrow_cue");
        }
        if (j.at("type") == "meta") CHECK(j.at("clock") == "virtual");
    }
    CHECK(lines == 4);
    fs::remove(path);
}

TEST_CASE("replay reproduces a scenario log exactly") {
    const auto model_path = temp_path("cladapt_replay_model.bin");
    const auto log_path = temp_path("cladapt_replay.jsonl");
    AppConfig cfg;
    auto lm = tiny_model(7);
    lstm::save_model(model_path, lm.params, lm.thresholds, lm.norms);
    {
        SessionLog log(log_path, "replay-test", "virtual");
        log.meta({{"config", config_to_json(cfg)},
                  {"model_path", model_path},
                  {"policy", "adaptive"}});
        scenario::run_scenario(lm, cfg, scenario::Policy::adaptive, 120.0, 4, &log);
    }
    ReplayReport rep = replay_log(log_path);
    CHECK(rep.decisions == 12);
    CHECK(rep.mismatches == 0);

    // A tampered decision is caught.
    std::ifstream in(log_path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    bool tampered = false;
    for (auto& l : lines) {
        if (!tampered && l.find("\"type\":\"decision\"") != std::string::npos) {
            json j = json::parse(l);
            j["stable_state"] = j["stable_state"] == "high" ? "low" : "high";
            l = j.dump();
            tampered = true;
        }
    }
    REQUIRE(tampered);
    std::ofstream out(log_path, std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
    out.close();
    ReplayReport rep2 = replay_log(log_path);
    CHECK(rep2.mismatches == 1);
    fs::remove(model_path);
    fs::remove(log_path);
}

TEST_CASE("ndjson server emits one inference per cadence") {
    AppConfig cfg;
    auto lm = tiny_model(9);
    NdjsonServer server(lm, cfg);
    server.start(0);
    REQUIRE(server.port() != 0);
    {
        LineClient client(server.port());
        // 30 s of EEG at 128 Hz -> inferences at t=10, 20, 30.
        int inferences = 0;
        for (int i = 0; i <= 30 * 128; ++i) {
            client.send_line(eeg_line(i / 128.0));
        }
        // Read until all three inferences arrive.
        for (int guard = 0; guard < 10 && inferences < 3; ++guard) {
            auto line = client.read_line();
            REQUIRE(line.has_value());
            const json j = json::parse(*line);
            if (j.at("type") == "inference") {
                ++inferences;
                CHECK(j.contains("t"));
                CHECK(j.contains("L"));
                CHECK(j.at("probs").size() == 3);
                CHECK(j.contains("raw_state"));
                CHECK(j.contains("stable_state"));
            }
        }
        CHECK(inferences == 3);
    }
    server.stop();
}

TEST_CASE("ndjson server reports malformed lines and keeps the session") {
    AppConfig cfg;
    auto lm = tiny_model(10);
    NdjsonServer server(lm, cfg);
    server.start(0);
    {
        LineClient client(server.port());
        client.send_line("{");
        auto line = client.read_line();
        REQUIRE(line.has_value());
        json j = json::parse(*line);
        CHECK(j.at("type") == "error");
        CHECK(j.at("code") == "malformed");

        // Session is still alive: a bad sample gets its own error code.
        client.send_line(R"({"type":"eeg","t":1.0,"ch":[1,2,3]})");
        line = client.read_line();
        REQUIRE(line.has_value());
        j = json::parse(*line);
        CHECK(j.at("type") == "error");
        CHECK(j.at("code") == "bad_channel_count");
    }
    server.stop();
}

TEST_CASE("wrong-object events trigger an immediate haptic intervention") {
    AppConfig cfg;
    auto lm = tiny_model(11);
    NdjsonServer server(lm, cfg);
    server.start(0);
    {
        LineClient client(server.port());
        for (int i = 0; i < 128; ++i) client.send_line(eeg_line(i / 128.0));
        json ev{{"type", "event"},    {"t", 1.0},   {"kind", "object_grab"},
                {"step", 3},          {"module", 1}, {"object_ok", false},
                {"difficulty", 3}};
        client.send_line(ev.dump());
        auto line = client.read_line();
        REQUIRE(line.has_value());
        const json j = json::parse(*line);
        CHECK(j.at("type") == "intervention");
        CHECK(j.at("kind") == "haptic_pulse");
        CHECK(j.at("t") == 1.0);
        CHECK(j.at("reason") == "wrong_object");
    }
    server.stop();
}

TEST_CASE("concurrent server sessions are independent") {
    AppConfig cfg;
    auto lm = tiny_model(12);
    NdjsonServer server(lm, cfg);
    server.start(0);
    {
        LineClient a(server.port());
        LineClient b(server.port());
        // Both clients reach t=10 and each gets exactly its own inference.
        for (int i = 0; i <= 10 * 128; ++i) {
            a.send_line(eeg_line(i / 128.0, 2.0));
            b.send_line(eeg_line(i / 128.0, 3.0));
        }
        auto la = a.read_line();
        auto lb = b.read_line();
        REQUIRE(la.has_value());
        REQUIRE(lb.has_value());
        CHECK(json::parse(*la).at("type") == "inference");
        CHECK(json::parse(*lb).at("type") == "inference");
    }
    server.stop();
}
