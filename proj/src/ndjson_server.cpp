#include "cladapt/ndjson_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <mutex>

#include <json.hpp>

#include "cladapt/engine.hpp"
#include "cladapt/errors.hpp"
#include "cladapt/session_log.hpp"
#include "cladapt/streams.hpp"

namespace cladapt {

namespace {

using nlohmann::json;

void send_all(int fd, const std::string& data) {
    size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) throw Error("io_error", "send failed");
        off += static_cast<size_t>(n);
    }
}

void send_line(int fd, const json& j) { send_all(fd, j.dump() + "\n"); }

void send_error(int fd, const std::string& code) {
    send_line(fd, json{{"type", "error"}, {"code", code}});
}

}  // namespace

NdjsonServer::NdjsonServer(const lstm::LoadedModel& model, AppConfig cfg)
    : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate();
}

NdjsonServer::~NdjsonServer() { stop(); }

void NdjsonServer::start(uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("io_error", "socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error("io_error", "bind failed on port " + std::to_string(port));
    }
    if (::listen(listen_fd_, 8) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error("io_error", "listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    stopping_ = false;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void NdjsonServer::stop() {
    if (listen_fd_ < 0 && !accept_thread_.joinable()) return;
    stopping_ = true;
    if (accept_thread_.joinable()) accept_thread_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    std::vector<std::thread> sessions;
    {
        std::lock_guard lock(sessions_mu_);
        sessions.swap(sessions_);
    }
    for (auto& t : sessions) {
        if (t.joinable()) t.join();
    }
}

void NdjsonServer::accept_loop() {
    while (!stopping_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, 100);
        if (rc <= 0) continue;
        const int client = ::accept(listen_fd_, nullptr, nullptr);
        if (client < 0) continue;
        std::lock_guard lock(sessions_mu_);
        sessions_.emplace_back([this, client] { session(client); });
    }
}

void NdjsonServer::session(int client_fd) {
    StreamSync stream(cfg_.stream);
    AdaptationEngine engine(model_, stream, cfg_.features, cfg_.engine);
    double next_close = std::max(cfg_.stream.window_len, cfg_.stream.cadence);

    auto tick_if_due = [&](double stream_t) {
        while (stream_t >= next_close - 1e-9) {
            TickOutput out = engine.tick(next_close);
            const Decision& d = out.decision;
            send_line(client_fd, json{{"type", "inference"},
                                      {"t", d.t},
                                      {"L", d.load},
                                      {"probs", d.probs},
                                      {"raw_state", to_string(d.raw_state)},
                                      {"stable_state", to_string(d.stable_state)}});
            for (const InterventionRecord& r : d.interventions) {
                json msg{{"type", "intervention"},
                         {"t", d.t},
                         {"kind", to_string(r.kind)},
                         {"reason", r.reason}};
                if (r.target) msg["target"] = *r.target;
                send_line(client_fd, msg);
            }
            next_close += cfg_.stream.cadence;
        }
    };

    std::string buffer;
    char chunk[4096];
    try {
        while (!stopping_) {
            pollfd pfd{client_fd, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, 100);
            if (rc < 0) break;
            if (rc == 0) continue;
            const ssize_t n = ::recv(client_fd, chunk, sizeof chunk, 0);
            if (n <= 0) break;  // peer closed / io error: session ends
            buffer.append(chunk, static_cast<size_t>(n));

            size_t pos;
            while ((pos = buffer.find('\n')) != std::string::npos) {
                const std::string line = buffer.substr(0, pos);
                buffer.erase(0, pos + 1);
                if (line.empty()) continue;

                json j;
                try {
                    j = json::parse(line);
                } catch (const json::exception&) {
                    send_error(client_fd, "malformed");
                    continue;
                }
                try {
                    const std::string type = j.value("type", "");
                    if (type == "eeg") {
                        EegSample s;
                        s.t = j.at("t").get<double>();
                        s.channels = j.at("ch").get<std::vector<double>>();
                        const PushResult r = stream.push_eeg(std::move(s));
                        if (!accepted(r)) {
                            send_error(client_fd, to_string(r));
                        } else {
                            tick_if_due(j.at("t").get<double>());
                        }
                    } else if (type == "event") {
                        TaskEvent e;
                        e.t = j.at("t").get<double>();
                        const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
                        if (!kind) {
                            send_error(client_fd, "bad_event_kind");
                            continue;
                        }
                        e.kind = *kind;
                        e.step_id = j.at("step").get<int>();
                        e.module_id = j.at("module").get<int>();
                        if (j.contains("difficulty")) e.difficulty = j.at("difficulty").get<int>();
                        if (j.contains("error_type") && !j.at("error_type").is_null()) {
                            e.error_type =
                                error_type_from_string(j.at("error_type").get<std::string>());
                        }
                        if (j.contains("object_ok") && !j.at("object_ok").is_null()) {
                            e.object_ok = j.at("object_ok").get<bool>();
                        }
                        const PushResult r = stream.push_event(e);
                        if (!accepted(r)) {
                            send_error(client_fd, to_string(r));
                            continue;
                        }
                        // Wrong-object grabs trigger haptics immediately; the
                        // cadence tick would be up to a window late.
                        if (auto fired = engine.core().on_wrong_object(e)) {
                            json msg{{"type", "intervention"},
                                     {"t", e.t},
                                     {"kind", to_string(fired->kind)},
                                     {"reason", fired->reason}};
                            if (fired->target) msg["target"] = *fired->target;
                            send_line(client_fd, msg);
                        }
                    } else {
                        send_error(client_fd, "unknown_type");
                    }
                } catch (const json::exception&) {
                    send_error(client_fd, "malformed");
                } catch (const Error& e) {
                    send_error(client_fd, e.code());
                }
            }
        }
    } catch (const Error&) {
        // io_error on send: drop the session.
    }
    ::close(client_fd);
}

}  // namespace cladapt
