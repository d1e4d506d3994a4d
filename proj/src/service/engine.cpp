#include "proguide/service/engine.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <set>

#include <spdlog/spdlog.h>

#include "proguide/core/json_io.hpp"
#include "proguide/core/random.hpp"
#include "proguide/core/text.hpp"
#include "proguide/prompt/guidance_prompt.hpp"
#include "proguide/rank/preference_ranker.hpp"

namespace proguide {

EngineDeps deps_of(ServiceBackends& b) { return {*b.goal, *b.answer, *b.generator, *b.click, *b.clock}; }

std::vector<GuidancePhrase> select_top_k(const CandidateMatrix& matrix, std::size_t k, const std::string& query) {
    struct Entry {
        const ScoredCandidate* candidate;
        int group;
        int rank;
    };
    std::vector<Entry> entries;
    for (int g = 0; g < static_cast<int>(matrix.rows.size()); ++g) {
        for (int r = 0; r < static_cast<int>(matrix.rows[static_cast<std::size_t>(g)].size()); ++r) {
            const auto& c = matrix.at(g, r);
            if (!c.ce_score) throw ValidationError("candidate lacks a ce_score");
            if (trim(c.text).empty()) continue;
            entries.push_back({&c, g, r});
        }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return *a.candidate->ce_score > *b.candidate->ce_score;
    });
    std::vector<GuidancePhrase> out;
    std::set<std::string> seen{normalize_phrase(query)};
    for (const auto& e : entries) {
        if (out.size() == k) break;
        if (!seen.insert(normalize_phrase(e.candidate->text)).second) continue;
        out.push_back({e.candidate->text, e.candidate->ce_score, PhraseOrigin::decoded});
    }
    if (out.size() < k) {
        throw ValidationError("decode produced only " + std::to_string(out.size()) + " distinct candidates for k = " +
                              std::to_string(k));
    }
    return out;
}

nlohmann::json summary_to_json(const ExportSummary& s) {
    return {{"clicked_turns", s.clicked_turns},
            {"emitted", s.emitted},
            {"skipped", s.skipped},
            {"skip_reasons", s.skip_reasons}};
}

std::uint64_t turn_seed(std::uint64_t seed, const std::string& session_id, int turn_index) {
    return mix_seed(mix_seed(seed, fnv1a64(session_id)), static_cast<std::uint64_t>(turn_index));
}

namespace {

using Millis = std::chrono::duration<double, std::milli>;

double since(std::chrono::steady_clock::time_point origin) {
    return Millis(std::chrono::steady_clock::now() - origin).count();
}

std::string gaa_status_name(GaaStatus status) {
    switch (status) {
        case GaaStatus::ok: return "ok";
        case GaaStatus::parse_failure: return "parse_failure";
        case GaaStatus::backend_failure: return "backend_failure";
    }
    return "unknown";
}

}  // namespace

Engine::Engine(EngineConfig config, EngineDeps deps, EventLog& log)
    : config_(std::move(config)), deps_(deps), log_(log) {
    config_.validate();
    replay();
}

void Engine::replay() {
    const auto records = log_.records();
    for (const auto& record : records) {
        deps_.clock.observe(record.ts_ms);
        apply(record);
    }
    if (!records.empty()) {
        spdlog::info("replayed {} events: {} sessions", records.size(), sessions_.size());
    }
}

void Engine::apply(const EventRecord& record) {
    const auto& p = record.payload;
    const std::string where = "event " + std::to_string(record.seq) + ": ";
    try {
        switch (record.kind) {
            case EventKind::session: {
                auto id = p.at("session_id").get<std::string>();
                if (sessions_.count(id)) throw ParseError(where + "duplicate session " + id);
                auto s = std::make_unique<SessionSlot>();
                s->session.id = id;
                sessions_.emplace(id, std::move(s));
                order_.push_back(id);
                ++created_;
                break;
            }
            case EventKind::turn: {
                auto& s = slot(p.at("session_id").get<std::string>());
                auto turn = p.at("turn").get<Turn>();
                if (turn.index != static_cast<int>(s.session.turns.size()) + 1) {
                    throw ParseError(where + "turn index " + std::to_string(turn.index) + " is out of order");
                }
                s.session.current_summary = turn.context.summary;
                s.session.turns.push_back(std::move(turn));
                if (p.contains("matrix")) {
                    s.matrices.push_back(p.at("matrix").get<CandidateMatrix>());
                } else {
                    s.matrices.push_back(std::nullopt);
                }
                break;
            }
            case EventKind::click: {
                auto click = p.get<ClickEvent>();
                auto& s = slot(click.session_id);
                if (click.turn_index < 1 || click.turn_index > static_cast<int>(s.session.turns.size())) {
                    throw ParseError(where + "click on unknown turn");
                }
                auto& turn = s.session.turns[static_cast<std::size_t>(click.turn_index - 1)];
                if (turn.clicked_index) throw ParseError(where + "second click on one turn");
                turn.clicked_index = click.guidance_index;
                break;
            }
            case EventKind::export_run:
            case EventKind::error:
                break;
        }
    } catch (const NotFoundError& e) {
        throw ParseError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + e.what());
    }
}

Engine::SessionSlot& Engine::slot(const std::string& session_id) const {
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session: " + session_id);
    return *it->second;
}

std::string Engine::create_session() {
    std::unique_lock lock(sessions_mutex_);
    std::string id = to_hex(mix_seed(config_.seed, created_ + 1));
    while (sessions_.count(id)) id += "x";
    auto record = log_.append(EventKind::session, {{"session_id", id}}, deps_.clock.now_ms());
    apply(record);
    return id;
}

CandidateMatrix Engine::decode(const std::string& query, const std::string& answer,
                               const ContextBundle& context) const {
    const std::string conditioning = join({query, answer, context.explicit_goal, context.summary}, " ");
    return dbs_decode(deps_.generator, deps_.generator.encode_prompt(conditioning), config_.dbs);
}

void Engine::score(CandidateMatrix& matrix, const std::string& query) const {
    for (auto& row : matrix.rows) {
        for (auto& c : row) c.ce_score = deps_.click.score(query, c.text);
    }
}

CandidateMatrix Engine::decode_candidates(const std::string& query, const std::string& answer,
                                          const ContextBundle& context) const {
    CandidateMatrix matrix = decode(query, answer, context);
    score(matrix, query);
    return matrix;
}

TurnResult Engine::handle_turn(const std::string& session_id, const std::string& query) {
    if (trim(query).empty()) throw ValidationError("query must not be empty");
    SessionSlot* s = nullptr;
    {
        std::shared_lock lock(sessions_mutex_);
        s = &slot(session_id);
    }
    std::lock_guard session_lock(s->mutex);

    const auto origin = std::chrono::steady_clock::now();
    TurnResult result;
    Turn& turn = result.turn;
    turn.index = static_cast<int>(s->session.turns.size()) + 1;
    turn.query = query;

    // Runs on the calling thread; the goal agent, when needed, runs beside it.
    std::string answer_error;
    auto run_answer = [&] {
        result.timings.answer_begin = since(origin);
        try {
            turn.answer = deps_.answer.answer(query);
        } catch (const std::exception& e) {
            answer_error = e.what();
        }
        result.timings.answer_end = since(origin);
    };

    if (turn.index == 1) {
        run_answer();
    } else {
        const Turn& previous = s->session.turns.back();
        GaaRequest request{query, QaPair{previous.query, previous.answer}, std::nullopt, turn.index};
        if (turn.index > 2) request.previous_summary = s->session.current_summary;
        const GaaOptions options{config_.gaa_max_attempts};

        auto goal = std::async(std::launch::async, [&, request] {
            const double begin = since(origin);
            auto outcome = adapt_goal(request, deps_.goal, options);
            return std::make_tuple(std::move(outcome), begin, since(origin));
        });
        run_answer();
        auto [outcome, goal_begin, goal_end] = goal.get();
        result.timings.goal_begin = goal_begin;
        result.timings.goal_end = goal_end;
        result.gaa_status = outcome.status;
        turn.context = outcome.bundle;
        turn.context.summary = step_goal_state(outcome.bundle, config_.summary_cap);
    }
    if (!answer_error.empty()) {
        log_.append(EventKind::error,
                    {{"session_id", session_id}, {"turn_index", turn.index}, {"stage", "answer"}, {"message", answer_error}},
                    deps_.clock.now_ms());
        throw BackendError("answer backend failed: " + answer_error);
    }

    const auto decode_start = std::chrono::steady_clock::now();
    CandidateMatrix matrix = decode(turn.query, turn.answer, turn.context);
    result.timings.decode_ms = since(decode_start);
    const auto ce_start = std::chrono::steady_clock::now();
    score(matrix, turn.query);
    result.timings.ce_ms = since(ce_start);

    try {
        turn.guidance = select_top_k(matrix, static_cast<std::size_t>(config_.k), turn.query);
    } catch (const ValidationError& e) {
        log_.append(EventKind::error,
                    {{"session_id", session_id}, {"turn_index", turn.index}, {"stage", "select"}, {"message", e.what()}},
                    deps_.clock.now_ms());
        throw;
    }

    nlohmann::json payload = {{"session_id", session_id},
                              {"turn", turn},
                              {"gaa", {{"status", gaa_status_name(result.gaa_status)}}}};
    if (config_.persist_matrix) payload["matrix"] = matrix;
    log_.append(EventKind::turn, std::move(payload), deps_.clock.now_ms());
    s->session.current_summary = turn.context.summary;
    s->session.turns.push_back(turn);
    s->matrices.push_back(config_.persist_matrix ? std::optional<CandidateMatrix>(std::move(matrix)) : std::nullopt);

    result.timings.total_ms = since(origin);
    note_latency(result);
    return result;
}

void Engine::note_latency(const TurnResult& r) {
    std::lock_guard lock(stats_mutex_);
    if (r.turn.index > 1) latencies_.push_back({Stage::gaa, r.timings.goal_end - r.timings.goal_begin});
    latencies_.push_back({Stage::answer, r.timings.answer_end - r.timings.answer_begin});
    latencies_.push_back({Stage::decode, r.timings.decode_ms});
    latencies_.push_back({Stage::ce, r.timings.ce_ms});
    latencies_.push_back({Stage::total, r.timings.total_ms});
    if (r.gaa_status != GaaStatus::ok) ++degraded_goal_calls_;
}

ClickEvent Engine::record_click(const std::string& session_id, int turn_index, int guidance_index) {
    SessionSlot* s = nullptr;
    {
        std::shared_lock lock(sessions_mutex_);
        s = &slot(session_id);
    }
    std::lock_guard session_lock(s->mutex);
    if (turn_index < 1 || turn_index > static_cast<int>(s->session.turns.size())) {
        throw NotFoundError("unknown turn " + std::to_string(turn_index) + " in session " + session_id);
    }
    Turn& turn = s->session.turns[static_cast<std::size_t>(turn_index - 1)];
    if (guidance_index < 0 || guidance_index >= static_cast<int>(turn.guidance.size())) {
        throw ValidationError("guidance_index out of range: " + std::to_string(guidance_index));
    }
    if (turn.clicked_index) throw ConflictError("turn " + std::to_string(turn_index) + " already has a click");
    const auto ts = deps_.clock.now_ms();
    ClickEvent click{session_id, turn_index, guidance_index, ts};
    log_.append(EventKind::click, click, ts);
    turn.clicked_index = guidance_index;
    return click;
}

Session Engine::session(const std::string& session_id) const {
    SessionSlot* s = nullptr;
    {
        std::shared_lock lock(sessions_mutex_);
        s = &slot(session_id);
    }
    std::lock_guard session_lock(s->mutex);
    return s->session;
}

std::vector<std::string> Engine::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    return order_;
}

std::optional<CandidateMatrix> Engine::matrix(const std::string& session_id, int turn_index) const {
    SessionSlot* s = nullptr;
    {
        std::shared_lock lock(sessions_mutex_);
        s = &slot(session_id);
    }
    std::lock_guard session_lock(s->mutex);
    if (turn_index < 1 || turn_index > static_cast<int>(s->matrices.size())) {
        throw NotFoundError("unknown turn " + std::to_string(turn_index));
    }
    return s->matrices[static_cast<std::size_t>(turn_index - 1)];
}

ExportResult Engine::export_preferences(PairArity format) {
    ExportResult out;
    const std::size_t k = static_cast<std::size_t>(config_.k);
    for (const auto& id : session_ids()) {
        const Session session = this->session(id);
        for (const auto& turn : session.turns) {
            if (!turn.clicked_index) continue;
            ++out.summary.clicked_turns;
            const auto clicked = static_cast<std::size_t>(*turn.clicked_index);
            const std::string prompt = render_guidance_prompt(turn.query, turn.answer, turn.context, k);

            if (format == PairArity::one_pair) {
                for (std::size_t i = 0; i < turn.guidance.size(); ++i) {
                    if (i == clicked) continue;
                    PreferenceRecord r{prompt, turn.guidance[clicked].text, turn.guidance[i].text, PairArity::one_pair};
                    out.jsonl += serialize_preference(r, k) + "\n";
                    ++out.summary.emitted;
                }
                continue;
            }

            auto stored = matrix(id, turn.index);
            RankInput input{stored ? *stored : decode_candidates(turn.query, turn.answer, turn.context),
                            turn.guidance[clicked],
                            turn.query,
                            config_.k,
                            config_.lambda,
                            turn_seed(config_.seed, id, turn.index)};
            auto outcome = rank_candidates(input);
            if (outcome.skipped) {
                ++out.summary.skipped;
                ++out.summary.skip_reasons[outcome.skip_reason];
                continue;
            }
            out.jsonl += serialize_preference(build_k_pair(turn.query, turn.answer, turn.context, outcome, k), k) + "\n";
            ++out.summary.emitted;
        }
    }
    auto payload = summary_to_json(out.summary);
    payload["format"] = to_string(format);
    log_.append(EventKind::export_run, std::move(payload), deps_.clock.now_ms());
    return out;
}

nlohmann::json Engine::metrics() const {
    std::size_t turns = 0;
    std::vector<ClickEvent> clicks;
    const auto ids = session_ids();
    for (const auto& id : ids) {
        const Session s = session(id);
        turns += s.turns.size();
        for (const auto& t : s.turns) {
            if (t.clicked_index) clicks.push_back({id, t.index, *t.clicked_index, 0});
        }
    }
    nlohmann::json out = {{"sessions", ids.size()}, {"turns", turns}, {"clicked_turns", clicks.size()}};
    out["ctr"] = turns > 0 ? nlohmann::json(ctr(clicks, turns)) : nlohmann::json(nullptr);
    std::lock_guard lock(stats_mutex_);
    out["latency"] = latency_report_json(latency_report(latencies_));
    out["degraded_goal_calls"] = degraded_goal_calls_;
    return out;
}

nlohmann::json Engine::state_snapshot() const {
    nlohmann::json sessions = nlohmann::json::array();
    for (const auto& id : session_ids()) {
        SessionSlot* s = nullptr;
        {
            std::shared_lock lock(sessions_mutex_);
            s = &slot(id);
        }
        std::lock_guard session_lock(s->mutex);
        nlohmann::json matrices = nlohmann::json::array();
        for (const auto& m : s->matrices) matrices.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
        sessions.push_back({{"session", s->session}, {"matrices", matrices}});
    }
    std::shared_lock lock(sessions_mutex_);
    return {{"sessions", sessions}, {"created", created_}};
}

}  // namespace proguide
