#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <utility>

#include "proguide/backend/completion.hpp"

namespace proguide::test_support {

class FunctionBackend : public CompletionBackend {
public:
    explicit FunctionBackend(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
    std::string complete(const std::string& prompt) override {
        ++calls_;
        return fn_(prompt);
    }
    int calls() const { return calls_; }

private:
    std::function<std::string(const std::string&)> fn_;
    std::atomic<int> calls_{0};
};

}  // namespace proguide::test_support
