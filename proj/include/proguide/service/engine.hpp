#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proguide/backend/completion.hpp"
#include "proguide/core/types.hpp"
#include "proguide/decode/dbs.hpp"
#include "proguide/decode/phrase_model.hpp"
#include "proguide/goal/gaa.hpp"
#include "proguide/metrics/metrics.hpp"
#include "proguide/rank/click_estimator.hpp"
#include "proguide/service/backends.hpp"
#include "proguide/service/config.hpp"
#include "proguide/service/event_log.hpp"

namespace proguide {

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A request that is well formed but clashes with stored state, such as a
// second click on one turn.
class ConflictError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Non-owning view of the collaborators of an engine. All must outlive it.
struct EngineDeps {
    CompletionBackend& goal;
    AnswerBackend& answer;
    const PhraseModelScorer& generator;
    const ClickScorer& click;
    Clock& clock;
};

EngineDeps deps_of(ServiceBackends& backends);

// Wall-clock offsets from the start of a turn, in milliseconds. The goal
// interval stays empty in round 1.
struct TurnTimings {
    double goal_begin = 0, goal_end = 0;
    double answer_begin = 0, answer_end = 0;
    double decode_ms = 0, ce_ms = 0, total_ms = 0;
};

struct TurnResult {
    Turn turn;
    GaaStatus gaa_status = GaaStatus::ok;
    TurnTimings timings;
};

// Served guidance: every matrix entry by CE descending (group, then rank,
// breaking ties), keeping the first occurrence of each normalized text and
// skipping the query itself, cut at k. Throws ValidationError when fewer than
// k such texts exist.
std::vector<GuidancePhrase> select_top_k(const CandidateMatrix& matrix, std::size_t k, const std::string& query = "");

struct ExportSummary {
    std::size_t clicked_turns = 0;
    std::size_t emitted = 0;
    std::size_t skipped = 0;
    std::map<std::string, std::size_t> skip_reasons;
};

nlohmann::json summary_to_json(const ExportSummary& summary);

struct ExportResult {
    std::string jsonl;
    ExportSummary summary;
};

// Per-turn seed of the rank stage.
std::uint64_t turn_seed(std::uint64_t seed, const std::string& session_id, int turn_index);

// Orchestrates turns and clicks over an event log. The constructor replays
// the log, so an engine opened on the log of a crashed process holds that
// process's last durable state. Calls on different sessions run in parallel;
// calls on one session are serialized.
class Engine {
public:
    Engine(EngineConfig config, EngineDeps deps, EventLog& log);

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    std::string create_session();
    TurnResult handle_turn(const std::string& session_id, const std::string& query);
    ClickEvent record_click(const std::string& session_id, int turn_index, int guidance_index);

    Session session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;  // creation order
    std::optional<CandidateMatrix> matrix(const std::string& session_id, int turn_index) const;

    // Decode and CE-score the candidates for one turn. Pure given the
    // generator and click scorer.
    CandidateMatrix decode_candidates(const std::string& query, const std::string& answer,
                                      const ContextBundle& context) const;

    ExportResult export_preferences(PairArity format);

    // sessions, turns, clicks, CTR, latency percentiles per stage.
    nlohmann::json metrics() const;

    // Sessions and persisted matrices as one JSON document, for comparing
    // states across restarts.
    nlohmann::json state_snapshot() const;

    const EngineConfig& config() const { return config_; }

private:
    struct SessionSlot {
        mutable std::mutex mutex;
        Session session;
        std::vector<std::optional<CandidateMatrix>> matrices;  // per turn
    };

    SessionSlot& slot(const std::string& session_id) const;
    void replay();
    void apply(const EventRecord& record);
    void note_latency(const TurnResult& result);
    CandidateMatrix decode(const std::string& query, const std::string& answer, const ContextBundle& context) const;
    void score(CandidateMatrix& matrix, const std::string& query) const;

    EngineConfig config_;
    EngineDeps deps_;
    EventLog& log_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<SessionSlot>> sessions_;
    std::vector<std::string> order_;
    std::uint64_t created_ = 0;

    mutable std::mutex stats_mutex_;
    std::vector<LatencySample> latencies_;
    std::size_t degraded_goal_calls_ = 0;
};

}  // namespace proguide
