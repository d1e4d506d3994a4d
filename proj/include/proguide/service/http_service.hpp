#pragma once

#include <memory>
#include <string>

#include "proguide/service/engine.hpp"

namespace httplib {
class Server;
}

namespace proguide {

// JSON API over an Engine:
//   POST /v1/sessions                          -> {"id"}
//   POST /v1/sessions/{id}/turns {"query"}     -> {"turn_index", "answer", "guidance", "shift_detected"}
//   POST /v1/sessions/{id}/turns/{t}/click {"guidance_index"} -> {}
//   GET  /v1/sessions/{id}                     -> session
//   GET  /v1/export/preferences?format=one-pair|k-pair -> JSONL
//   GET  /v1/metrics                           -> report
// Errors come back as {"error": message} with 400 (invalid), 404 (unknown),
// 409 (conflict), 502 (backend failure) or 500.
class HttpService {
public:
    explicit HttpService(Engine& engine);
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    // Binds to a free port and returns it; serve() then blocks.
    int bind_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    bool serve();
    void stop();
    bool running() const;
    void wait_until_ready() const;

private:
    void install_routes();

    Engine& engine_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace proguide
