#include "proguide/service/backends.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "proguide/core/text.hpp"
#include "proguide/goal/gaa.hpp"
#include "proguide/rank/preference_ranker.hpp"

namespace proguide {

std::string EchoAnswerBackend::answer(const std::string& query) {
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    return "Answer: " + query;
}

bool is_http_url(const std::string& text) { return text.rfind("http://", 0) == 0 || text.rfind("https://", 0) == 0; }

HttpEndpoint parse_endpoint(const std::string& url) {
    if (!is_http_url(url)) throw ValidationError("not an http(s) URL: " + url);
    const auto host_begin = url.find("://") + 3;
    const auto slash = url.find('/', host_begin);
    if (slash == host_begin) throw ValidationError("URL lacks a host: " + url);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body, std::chrono::milliseconds timeout) {
    httplib::Client client(endpoint.base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(endpoint.path, body.dump(), "application/json");
    const std::string where = endpoint.base + endpoint.path;
    if (!res) throw BackendError(where + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw BackendError(where + ": HTTP " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw BackendError(where + ": reply is not JSON");
    }
}

namespace {

std::string string_field(const nlohmann::json& reply, const char* key, const HttpEndpoint& endpoint) {
    if (!reply.is_object() || !reply.contains(key) || !reply.at(key).is_string()) {
        throw BackendError(endpoint.base + endpoint.path + ": reply lacks string field " + key);
    }
    return reply.at(key).get<std::string>();
}

}  // namespace

std::string HttpCompletionBackend::complete(const std::string& prompt) {
    return string_field(post_json(endpoint_, {{"prompt", prompt}}, timeout_), "completion", endpoint_);
}

std::string HttpAnswerBackend::answer(const std::string& query) {
    return string_field(post_json(endpoint_, {{"query", query}}, timeout_), "answer", endpoint_);
}

double HttpClickScorer::score(const std::string& query, const std::string& guidance) const {
    auto reply = post_json(endpoint_, {{"query", query}, {"guidance", guidance}}, timeout_);
    if (!reply.is_object() || !reply.contains("score") || !reply.at("score").is_number()) {
        throw BackendError(endpoint_.base + endpoint_.path + ": reply lacks numeric field score");
    }
    const double p = reply.at("score").get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw BackendError(endpoint_.base + endpoint_.path + ": score outside [0, 1]");
    return p;
}

double LexicalClickScorer::score(const std::string& query, const std::string& guidance) const {
    const auto words = split_words(guidance);
    const double n = static_cast<double>(words.size());
    const double length_fit = n >= 3 && n <= 8 ? 0.5 : -0.5;
    return logistic(4.0 * similarity(query, guidance) + length_fit - 1.5 + 0.01 * std::min(n, 10.0));
}

ServiceBackends make_backends(const EngineConfig& config, bool logical_clock) {
    const std::chrono::milliseconds timeout(config.http_timeout_ms);
    ServiceBackends b;

    if (config.goal_backend == "mock") {
        b.goal = std::make_unique<KeywordShiftGoalBackend>(std::chrono::milliseconds(config.goal_delay_ms));
    } else if (is_http_url(config.goal_backend)) {
        b.goal = std::make_unique<HttpCompletionBackend>(config.goal_backend, timeout);
    } else {
        throw ValidationError("goal_backend must be \"mock\" or a URL");
    }

    if (config.answer_backend == "echo") {
        b.answer = std::make_unique<EchoAnswerBackend>(std::chrono::milliseconds(config.answer_delay_ms));
    } else if (is_http_url(config.answer_backend)) {
        b.answer = std::make_unique<HttpAnswerBackend>(config.answer_backend, timeout);
    } else {
        throw ValidationError("answer_backend must be \"echo\" or a URL");
    }

    if (is_http_url(config.teacher_backend)) {
        b.teacher = std::make_unique<HttpCompletionBackend>(config.teacher_backend, timeout);
    } else if (!config.teacher_backend.empty()) {
        b.teacher = std::make_unique<FileCompletionBackend>(config.teacher_backend);
    }

    b.generator = std::make_unique<PhraseModelScorer>(PhraseModelScorer::load(config.phrase_corpus));

    if (config.ce_backend == "lexical") {
        b.click = std::make_unique<LexicalClickScorer>();
    } else if (config.ce_backend == "model") {
        b.click = std::make_unique<ModelClickScorer>(load_model(config.ce_model));
    } else if (is_http_url(config.ce_backend)) {
        b.click = std::make_unique<HttpClickScorer>(config.ce_backend, timeout);
    } else {
        throw ValidationError("ce_backend must be \"lexical\", \"model\" or a URL");
    }

    if (logical_clock) {
        b.clock = std::make_unique<LogicalClock>();
    } else {
        b.clock = std::make_unique<SystemClock>();
    }
    return b;
}

}  // namespace proguide
