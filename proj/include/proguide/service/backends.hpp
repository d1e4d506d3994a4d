#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "proguide/backend/completion.hpp"
#include "proguide/decode/phrase_model.hpp"
#include "proguide/rank/click_estimator.hpp"
#include "proguide/service/config.hpp"
#include "proguide/service/event_log.hpp"

namespace proguide {

// Produces the answer A_i for a query. Thread-safe.
class AnswerBackend {
public:
    virtual ~AnswerBackend() = default;
    virtual std::string answer(const std::string& query) = 0;
};

// "Answer: <query>", optionally after a fixed delay.
class EchoAnswerBackend : public AnswerBackend {
public:
    explicit EchoAnswerBackend(std::chrono::milliseconds delay = std::chrono::milliseconds(0)) : delay_(delay) {}
    std::string answer(const std::string& query) override;

private:
    std::chrono::milliseconds delay_;
};

struct HttpEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

// Splits an http(s) URL; throws ValidationError for anything else.
HttpEndpoint parse_endpoint(const std::string& url);
bool is_http_url(const std::string& text);

// POSTs a JSON body and returns the parsed JSON reply. Throws BackendError on
// transport failure, non-2xx status or a body that is not JSON.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body, std::chrono::milliseconds timeout);

// {"prompt": p} -> {"completion": text}
class HttpCompletionBackend : public CompletionBackend {
public:
    HttpCompletionBackend(const std::string& url, std::chrono::milliseconds timeout)
        : endpoint_(parse_endpoint(url)), timeout_(timeout) {}
    std::string complete(const std::string& prompt) override;

private:
    HttpEndpoint endpoint_;
    std::chrono::milliseconds timeout_;
};

// {"query": q} -> {"answer": text}
class HttpAnswerBackend : public AnswerBackend {
public:
    HttpAnswerBackend(const std::string& url, std::chrono::milliseconds timeout)
        : endpoint_(parse_endpoint(url)), timeout_(timeout) {}
    std::string answer(const std::string& query) override;

private:
    HttpEndpoint endpoint_;
    std::chrono::milliseconds timeout_;
};

// {"query": q, "guidance": g} -> {"score": p}
class HttpClickScorer : public ClickScorer {
public:
    HttpClickScorer(const std::string& url, std::chrono::milliseconds timeout)
        : endpoint_(parse_endpoint(url)), timeout_(timeout) {}
    double score(const std::string& query, const std::string& guidance) const override;

private:
    HttpEndpoint endpoint_;
    std::chrono::milliseconds timeout_;
};

// Untrained stand-in for the click estimator: rises with word overlap with
// the query, with a small preference for phrases of three to eight words.
// Deterministic, in (0, 1).
class LexicalClickScorer : public ClickScorer {
public:
    double score(const std::string& query, const std::string& guidance) const override;
};

// Everything the engine talks to, built from a config.
struct ServiceBackends {
    std::unique_ptr<CompletionBackend> goal;
    std::unique_ptr<AnswerBackend> answer;
    std::unique_ptr<CompletionBackend> teacher;  // null when not configured
    std::unique_ptr<PhraseModelScorer> generator;
    std::unique_ptr<ClickScorer> click;
    std::unique_ptr<Clock> clock;
};

// `logical_clock` selects LogicalClock instead of the wall clock.
ServiceBackends make_backends(const EngineConfig& config, bool logical_clock = false);

}  // namespace proguide
