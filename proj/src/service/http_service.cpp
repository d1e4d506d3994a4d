#include "proguide/service/http_service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "proguide/backend/completion.hpp"
#include "proguide/core/json_io.hpp"

namespace proguide {

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

nlohmann::json parse_body(const httplib::Request& req) {
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error&) {
        throw ValidationError("request body is not valid JSON");
    }
}

template <typename T>
T body_field(const nlohmann::json& body, const char* key) {
    if (!body.contains(key)) throw ValidationError(std::string("missing field: ") + key);
    try {
        return body.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("field has the wrong type: ") + key);
    }
}

// Maps engine exceptions onto status codes.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFoundError& e) {
            reply(res, 404, {{"error", e.what()}});
        } catch (const ConflictError& e) {
            reply(res, 409, {{"error", e.what()}});
        } catch (const ValidationError& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const ParseError& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const BackendError& e) {
            reply(res, 502, {{"error", e.what()}});
        } catch (const std::exception& e) {
            spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
            reply(res, 500, {{"error", e.what()}});
        }
    };
}

int parse_turn_index(const std::string& text) {
    try {
        std::size_t used = 0;
        int v = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("turn index is not a number: " + text);
    }
}

}  // namespace

HttpService::HttpService(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::install_routes() {
    auto& s = *server_;
    // The browser client may be served from another origin.
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    s.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Post("/v1/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, {{"id", engine_.create_session()}});
           }));

    s.Post(R"(/v1/sessions/([^/]+)/turns)", guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto body = parse_body(req);
               auto result = engine_.handle_turn(req.matches[1], body_field<std::string>(body, "query"));
               nlohmann::json guidance = nlohmann::json::array();
               for (const auto& g : result.turn.guidance) guidance.push_back(g.text);
               reply(res, 200,
                     {{"turn_index", result.turn.index},
                      {"answer", result.turn.answer},
                      {"guidance", guidance},
                      {"shift_detected", result.turn.context.shift_detected}});
           }));

    s.Post(R"(/v1/sessions/([^/]+)/turns/([^/]+)/click)",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
               auto body = parse_body(req);
               engine_.record_click(req.matches[1], parse_turn_index(req.matches[2]),
                                    body_field<int>(body, "guidance_index"));
               reply(res, 200, nlohmann::json::object());
           }));

    s.Get(R"(/v1/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              reply(res, 200, nlohmann::json(engine_.session(req.matches[1])));
          }));

    s.Get("/v1/export/preferences", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const std::string format = req.has_param("format") ? req.get_param_value("format") : "one-pair";
              auto result = engine_.export_preferences(pair_arity_from_string(format));
              res.status = 200;
              res.set_header("X-Export-Summary", summary_to_json(result.summary).dump());
              res.set_content(result.jsonl, "application/x-ndjson");
          }));

    s.Get("/v1/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
              reply(res, 200, engine_.metrics());
          }));

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) reply(res, res.status, {{"error", httplib::status_message(res.status)}});
    });
}

int HttpService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpService::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool HttpService::serve() { return server_->listen_after_bind(); }

void HttpService::stop() {
    if (server_) server_->stop();
}

bool HttpService::running() const { return server_->is_running(); }

void HttpService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace proguide
