#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace proguide {

// Transport-level failure of a pluggable backend (timeout, refused
// connection, non-2xx status, missing canned response).
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Prompt in, completion text out. Used for the goal-tracking agent and the
// distillation teacher. Implementations must be safe to call from several
// threads at once.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

// Key under which canned completions are stored: hex FNV-1a of the prompt.
std::string prompt_key(const std::string& prompt);

// Replays canned completions from a JSONL file of
// {"prompt_hash": <hex>, "completion": <text>}; a "*" hash is the fallback.
class FileCompletionBackend : public CompletionBackend {
public:
    explicit FileCompletionBackend(const std::filesystem::path& path);
    explicit FileCompletionBackend(std::map<std::string, std::string> by_key);

    std::string complete(const std::string& prompt) override;

    std::size_t size() const { return by_key_.size(); }

private:
    std::map<std::string, std::string> by_key_;
};

}  // namespace proguide
