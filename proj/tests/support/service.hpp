#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unistd.h>

#include "proguide/service/backends.hpp"
#include "proguide/service/engine.hpp"

namespace proguide::test_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("proguide_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline EngineConfig test_config(const std::filesystem::path& data_dir) {
    EngineConfig c;
    c.data_dir = data_dir.string();
    c.phrase_corpus = std::string(PROGUIDE_TEST_DATA) + "/phrases.txt";
    return c;
}

class FunctionAnswerBackend : public AnswerBackend {
public:
    explicit FunctionAnswerBackend(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
    std::string answer(const std::string& query) override { return fn_(query); }

private:
    std::function<std::string(const std::string&)> fn_;
};

class ConstantClickScorer : public ClickScorer {
public:
    explicit ConstantClickScorer(double p) : p_(p) {}
    double score(const std::string&, const std::string&) const override { return p_; }

private:
    double p_;
};

// Config-built backends with a logical clock, an event log in the data
// directory and an engine over both. restart() drops everything and reopens
// from disk, as a new process would.
struct Harness {
    EngineConfig config;
    ServiceBackends backends;
    std::unique_ptr<EventLog> log;
    std::unique_ptr<Engine> engine;

    explicit Harness(EngineConfig c) : config(std::move(c)) { open(); }

    void open() {
        backends = make_backends(config, true);
        log = std::make_unique<EventLog>(config.event_log_path());
        engine = std::make_unique<Engine>(config, deps_of(backends), *log);
    }

    void restart() {
        engine.reset();
        log.reset();
        backends = ServiceBackends{};
        open();
    }
};

}  // namespace proguide::test_support
