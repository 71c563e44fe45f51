#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "cladapt/config.hpp"
#include "cladapt/lstm.hpp"

namespace cladapt {

// NDJSON-over-TCP inference service. One session per connection; sessions
// are fully independent. Clients stream eeg/event lines; the server answers
// with an inference line every cadence (driven by stream time) and
// intervention lines as rules fire. Malformed input yields an error line
// without dropping the session.
class NdjsonServer {
public:
    NdjsonServer(const lstm::LoadedModel& model, AppConfig cfg);
    ~NdjsonServer();

    // Binds and starts the accept loop. Port 0 picks an ephemeral port;
    // port() reports the actual one.
    void start(uint16_t port);
    void stop();

    uint16_t port() const { return port_; }

private:
    void accept_loop();
    void session(int client_fd);

    const lstm::LoadedModel& model_;
    AppConfig cfg_;
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::vector<std::thread> sessions_;
    std::mutex sessions_mu_;
};

}  // namespace cladapt
