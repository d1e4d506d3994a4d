#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace proguide {

// Time source for event timestamps. The logical clock makes logs
// reproducible byte for byte.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    // Called with every timestamp found while replaying a log.
    virtual void observe(std::int64_t /*ts_ms*/) {}
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() override;
};

// Each reading advances by `step` milliseconds from `start`; replayed
// timestamps move it forward so a restarted process continues the sequence.
class LogicalClock : public Clock {
public:
    static constexpr std::int64_t kDefaultStart = 1'700'000'000'000;
    explicit LogicalClock(std::int64_t start = kDefaultStart, std::int64_t step = 1) : last_(start), step_(step) {}
    std::int64_t now_ms() override { return last_.fetch_add(step_) + step_; }
    void observe(std::int64_t ts_ms) override;

private:
    std::atomic<std::int64_t> last_;
    std::int64_t step_;
};

enum class EventKind { session, turn, click, export_run, error };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& text);

struct EventRecord {
    std::uint64_t seq = 0;
    std::int64_t ts_ms = 0;
    EventKind kind = EventKind::turn;
    nlohmann::json payload;
    bool operator==(const EventRecord&) const = default;
};

nlohmann::json event_to_json(const EventRecord& record);
EventRecord event_from_json(const nlohmann::json& j);

// Append-only JSONL event log, one record per line, sequence numbers strictly
// increasing from 1. Appends from several threads are serialized; each line
// is flushed before append() returns.
class EventLog {
public:
    // In-memory log, nothing is written.
    EventLog() = default;
    // Loads the existing records of `path` (creating the file and its
    // directory when absent). A final line without its newline is a torn
    // write from a crash and is cut off; any other malformed line throws
    // ParseError.
    explicit EventLog(const std::filesystem::path& path);

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    EventRecord append(EventKind kind, nlohmann::json payload, std::int64_t ts_ms);
    std::vector<EventRecord> records() const;
    std::size_t size() const;
    std::size_t torn_bytes_dropped() const { return torn_bytes_; }
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> path_;
    std::ofstream out_;
    std::vector<EventRecord> records_;
    std::size_t torn_bytes_ = 0;
};

// Strict reader used by tools: same rules as the EventLog constructor but
// never modifies the file.
std::vector<EventRecord> read_event_log(const std::filesystem::path& path);

}  // namespace proguide
