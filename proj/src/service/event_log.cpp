#include "proguide/service/event_log.hpp"

#include <chrono>

#include "proguide/core/json_io.hpp"
#include "proguide/core/text.hpp"
#include "proguide/core/types.hpp"

namespace proguide {

std::int64_t SystemClock::now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void LogicalClock::observe(std::int64_t ts_ms) {
    auto current = last_.load();
    while (ts_ms > current && !last_.compare_exchange_weak(current, ts_ms)) {
    }
}

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::session: return "session";
        case EventKind::turn: return "turn";
        case EventKind::click: return "click";
        case EventKind::export_run: return "export";
        case EventKind::error: return "error";
    }
    throw ValidationError("unknown event kind");
}

EventKind event_kind_from_string(const std::string& text) {
    if (text == "session") return EventKind::session;
    if (text == "turn") return EventKind::turn;
    if (text == "click") return EventKind::click;
    if (text == "export") return EventKind::export_run;
    if (text == "error") return EventKind::error;
    throw ParseError("unknown event kind: " + text);
}

nlohmann::json event_to_json(const EventRecord& r) {
    return {{"seq", r.seq}, {"ts", r.ts_ms}, {"kind", to_string(r.kind)}, {"payload", r.payload}};
}

EventRecord event_from_json(const nlohmann::json& j) {
    try {
        EventRecord r;
        r.seq = j.at("seq").get<std::uint64_t>();
        r.ts_ms = j.at("ts").get<std::int64_t>();
        r.kind = event_kind_from_string(j.at("kind").get<std::string>());
        r.payload = j.at("payload");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed event record: ") + e.what());
    }
}

namespace {

struct LoadedLog {
    std::vector<EventRecord> records;
    std::size_t valid_bytes = 0;
    std::size_t torn_bytes = 0;
};

LoadedLog parse_log(const std::filesystem::path& path, const std::string& content) {
    LoadedLog out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        ++line_no;
        const auto end = content.find('\n', pos);
        if (end == std::string::npos) {
            out.torn_bytes = content.size() - pos;
            break;
        }
        const std::string line = content.substr(pos, end - pos);
        pos = end + 1;
        if (trim(line).empty()) {
            out.valid_bytes = pos;
            continue;
        }
        EventRecord record;
        try {
            record = event_from_json(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        const std::uint64_t expected_min = out.records.empty() ? 1 : out.records.back().seq + 1;
        if (record.seq < expected_min) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": sequence number " +
                             std::to_string(record.seq) + " does not increase");
        }
        out.records.push_back(std::move(record));
        out.valid_bytes = pos;
    }
    return out;
}

}  // namespace

EventLog::EventLog(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (std::filesystem::exists(path)) {
        auto loaded = parse_log(path, read_text_file(path));
        records_ = std::move(loaded.records);
        torn_bytes_ = loaded.torn_bytes;
        if (torn_bytes_ > 0) std::filesystem::resize_file(path, loaded.valid_bytes);
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot open event log " + path.string());
}

EventRecord EventLog::append(EventKind kind, nlohmann::json payload, std::int64_t ts_ms) {
    std::lock_guard lock(mutex_);
    EventRecord record{records_.empty() ? 1 : records_.back().seq + 1, ts_ms, kind, std::move(payload)};
    if (path_) {
        out_ << to_jsonl_line(event_to_json(record)) << '\n';
        out_.flush();
        if (!out_) throw std::runtime_error("event log write failed: " + path_->string());
    }
    records_.push_back(record);
    return record;
}

std::vector<EventRecord> EventLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t EventLog::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
    return parse_log(path, read_text_file(path)).records;
}

}  // namespace proguide
