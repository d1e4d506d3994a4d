#include "proguide/goal/gaa.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "proguide/core/text.hpp"

namespace proguide {

namespace {

constexpr std::string_view kGoalTrackingTemplate = R"(Prompt:
You are a Goal-Tracking Model specifically designed for multi-turn dialogue scenarios. Your task is to understand and track the user's evolving goals throughout the dialogue and produce coherent summaries that capture the history and progression of the conversation. This process involves preserving contextual continuity and relevance to the user's current objectives. To accomplish this, you will utilize the following inputs:
- [Q_i]: The current user question in the dialogue, which may indicate a continuation of previous goals or the introduction of new goals.
- [(Q_{i-1}, A_{i-1})]: The immediate previous question and answer pair, providing context for Q_i and potentially containing clues about changes in the user's intent since the last turn.
- [S_{i-1}]: A comprehensive summary of the dialogue history up to the interaction immediately preceding Q_i, encapsulating key points and actions taken that are relevant to the evolving goals of the user.

Task:
(1) Explicit Goal Analysis:
- Perform a detailed analysis of [Q_i] in the context of [(Q_{i-1}, A_{i-1})], to detect nuanced changes in the user's goals. Provide a clear and explicit textual explanation that articulates the current user's intent, and infer any underlying or potential needs that may be driving this intent.
(2) Goal-relevant Summary:
- Based on the results of the explicit goal analysis, selectively extract content from [S_{i-1}] and [(Q_{i-1}, A_{i-1})], that is directly related to the user's current goals. Integrate these key points into a new, updated summary [S_i], ensuring that it is concise yet comprehensive. Prune any elements that are no longer relevant to the current context or the user's goals to maintain focus and clarity in the evolving conversation.
(3) Detection Signal:
- Provide a detection signal [D_i] that indicates whether a goal transition has occurred between the previous turn and the current turn. If such a transition is detected, trigger a reset of [S_i] to ensure that the summary remains relevant and does not retain outdated information that could interfere with the user's current goal orientation.

Expected Output Format:
The expected output should be a structured JSON object, as follows:
{
  "explicitGoalAnalysis": "Description of the user's current intent, and inferred potential needs of the user",
  "goalRelevantSummary": "Coherent summary incorporating key points relevant to the user's current goals",
  "detectionSignal": "Boolean indicating whether a goal transition has been detected"
}

Inputs:
)";

void append_slot(std::string& out, std::string_view header, std::string_view value) {
    out.append(header);
    out.push_back('\n');
    out.append(value);
    out.push_back('\n');
}

struct Slots {
    std::string current_query;
    std::string previous_query;
    std::string previous_answer;
    std::string previous_summary;
};

// Slots are rendered last and in fixed order, so each value runs from its
// header to the next one.
Slots read_slots(const std::string& prompt) {
    const std::array<std::string_view, 4> headers = {kSlotCurrentQuery, kSlotPreviousQuery, kSlotPreviousAnswer,
                                                     kSlotPreviousSummary};
    std::array<std::string, 4> values;
    values.fill(std::string(kNoneMarker));
    std::size_t cursor = prompt.rfind("\n" + std::string(headers[0]) + "\n");
    if (cursor == std::string::npos) return {values[0], values[1], values[2], values[3]};
    std::array<std::size_t, 4> starts{};
    std::array<std::size_t, 4> header_pos{};
    for (std::size_t i = 0; i < headers.size(); ++i) {
        auto pos = prompt.find("\n" + std::string(headers[i]) + "\n", cursor);
        if (pos == std::string::npos) return {values[0], values[1], values[2], values[3]};
        header_pos[i] = pos;
        starts[i] = pos + headers[i].size() + 2;
        cursor = starts[i] - 1;
    }
    for (std::size_t i = 0; i < headers.size(); ++i) {
        std::size_t end = i + 1 < headers.size() ? header_pos[i + 1] : prompt.size();
        std::string value = prompt.substr(starts[i], end > starts[i] ? end - starts[i] : 0);
        if (!value.empty() && value.back() == '\n') value.pop_back();
        values[i] = std::move(value);
    }
    return {values[0], values[1], values[2], values[3]};
}

std::vector<std::string> content_words(std::string_view text) {
    std::vector<std::string> out;
    for (auto& w : split_words(text)) {
        if (!is_stopword(w)) out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

void validate_gaa_request(const GaaRequest& request) {
    if (request.round_index < 1) throw ValidationError("round_index must be >= 1");
    if (request.round_index == 1 && (request.previous_pair || request.previous_summary)) {
        throw ValidationError("round 1 request must not carry previous turn or summary");
    }
    if (request.round_index == 2 && (!request.previous_pair || request.previous_summary)) {
        throw ValidationError("round 2 request needs the previous pair and no summary");
    }
    if (request.round_index > 2 && (!request.previous_pair || !request.previous_summary)) {
        throw ValidationError("round > 2 request needs the previous pair and summary");
    }
}

std::string render_gaa_prompt(const GaaRequest& request) {
    validate_gaa_request(request);
    std::string out(kGoalTrackingTemplate);
    append_slot(out, kSlotCurrentQuery, request.current_query);
    append_slot(out, kSlotPreviousQuery, request.previous_pair ? request.previous_pair->query : kNoneMarker);
    append_slot(out, kSlotPreviousAnswer, request.previous_pair ? request.previous_pair->answer : kNoneMarker);
    const bool has_summary = request.previous_summary && !request.previous_summary->empty();
    append_slot(out, kSlotPreviousSummary, has_summary ? std::string_view(*request.previous_summary) : kNoneMarker);
    return out;
}

ContextBundle parse_gaa_response(std::string_view raw) {
    const std::string text(raw);
    auto open = text.find('{');
    auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw GaaParseFailure("goal agent response holds no JSON object", text);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.substr(open, close - open + 1));
    } catch (const nlohmann::json::parse_error& e) {
        throw GaaParseFailure(std::string("goal agent response is not valid JSON: ") + e.what(), text);
    }
    if (!j.is_object()) throw GaaParseFailure("goal agent response is not an object", text);

    auto string_field = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw GaaParseFailure(std::string("goal agent response lacks string field ") + key, text);
        }
        return j.at(key).get<std::string>();
    };

    ContextBundle bundle;
    bundle.explicit_goal = string_field("explicitGoalAnalysis");
    bundle.summary = string_field("goalRelevantSummary");
    if (!j.contains("detectionSignal")) throw GaaParseFailure("goal agent response lacks detectionSignal", text);
    const auto& signal = j.at("detectionSignal");
    if (signal.is_boolean()) {
        bundle.shift_detected = signal.get<bool>();
    } else if (signal.is_string()) {
        auto folded = casefold(trim(signal.get<std::string>()));
        if (folded == "true") {
            bundle.shift_detected = true;
        } else if (folded == "false") {
            bundle.shift_detected = false;
        } else {
            throw GaaParseFailure("detectionSignal is neither true nor false", text);
        }
    } else {
        throw GaaParseFailure("detectionSignal has the wrong type", text);
    }
    return bundle;
}

std::string step_goal_state(const ContextBundle& new_bundle, std::size_t summary_cap) {
    if (new_bundle.shift_detected) return {};
    return truncate_utf8_tail(new_bundle.summary, summary_cap);
}

GaaOutcome adapt_goal(const GaaRequest& request, CompletionBackend& backend, const GaaOptions& options) {
    if (request.round_index < 2) throw ValidationError("goal adaptation runs from round 2 onwards");
    const std::string prompt = render_gaa_prompt(request);

    GaaOutcome outcome;
    for (int attempt = 1; attempt <= std::max(1, options.max_attempts); ++attempt) {
        outcome.attempts = attempt;
        try {
            outcome.bundle = parse_gaa_response(backend.complete(prompt));
            outcome.status = GaaStatus::ok;
            outcome.error.clear();
            return outcome;
        } catch (const GaaParseFailure& e) {
            outcome.status = GaaStatus::parse_failure;
            outcome.error = e.what();
        } catch (const BackendError& e) {
            outcome.status = GaaStatus::backend_failure;
            outcome.error = e.what();
        }
    }

    spdlog::warn("goal agent degraded after {} attempt(s) in round {}: {}", outcome.attempts, request.round_index,
                 outcome.error);
    outcome.bundle = ContextBundle{"", request.previous_summary.value_or(""), false};
    return outcome;
}

bool is_stopword(std::string_view word) {
    static const std::set<std::string_view> kStopwords = {
        "a",    "about", "an",   "and",  "any",   "are",  "be",    "can",  "could", "do",   "does",
        "for",  "from",  "get",  "how",  "i",     "in",   "is",    "it",   "me",    "more", "my",
        "of",   "on",    "or",   "should", "tell", "than", "that", "the",  "there", "this", "to",
        "what", "when",  "where", "which", "who",  "why",  "will", "with", "would", "you",  "your",
        "none"};
    return kStopwords.count(word) > 0;
}

std::string KeywordShiftGoalBackend::complete(const std::string& prompt) {
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

    const Slots slots = read_slots(prompt);
    const std::string& query = slots.current_query;
    const std::string& previous_query = slots.previous_query;
    const std::string& previous_summary = slots.previous_summary;

    const auto current = content_words(query);
    std::set<std::string> history;
    for (auto& w : content_words(previous_query)) history.insert(w);
    for (auto& w : content_words(previous_summary)) history.insert(w);

    const bool overlap = std::any_of(current.begin(), current.end(),
                                     [&](const std::string& w) { return history.count(w) > 0; });
    const bool shift = !current.empty() && !overlap;

    // Summary in order of first appearance: old summary, previous question,
    // current question. On a shift it still holds pre-shift material.
    std::vector<std::string> summary;
    std::set<std::string> seen;
    for (const auto* source : {&previous_summary, &previous_query, &query}) {
        for (auto& w : content_words(*source)) {
            if (seen.insert(w).second) summary.push_back(w);
        }
    }

    nlohmann::json out = {{"explicitGoalAnalysis", "user asks about " + join(current, " ")},
                          {"goalRelevantSummary", join(summary, " ")},
                          {"detectionSignal", shift}};
    return out.dump();
}

}  // namespace proguide
