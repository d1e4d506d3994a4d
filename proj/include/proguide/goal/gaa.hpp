#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "proguide/backend/completion.hpp"
#include "proguide/core/types.hpp"

namespace proguide {

struct QaPair {
    std::string query;
    std::string answer;
};

// Input of one goal-tracking call for round `round_index`. There is no slot
// for the current turn's answer: the agent runs while that answer is still
// being generated.
struct GaaRequest {
    std::string current_query;
    std::optional<QaPair> previous_pair;
    std::optional<std::string> previous_summary;
    int round_index = 2;
};

// Throws ValidationError unless the slots present match the round:
// round 1 has neither, round 2 only the previous pair, later rounds both.
void validate_gaa_request(const GaaRequest& request);

// Marker rendered for absent inputs.
inline constexpr std::string_view kNoneMarker = "(none)";

// Slot headers that close the prompt, one per line, each followed by the
// slot value. Mock backends locate inputs by these lines.
inline constexpr std::string_view kSlotCurrentQuery = "[Q_i]:";
inline constexpr std::string_view kSlotPreviousQuery = "[Q_{i-1}]:";
inline constexpr std::string_view kSlotPreviousAnswer = "[A_{i-1}]:";
inline constexpr std::string_view kSlotPreviousSummary = "[S_{i-1}]:";

std::string render_gaa_prompt(const GaaRequest& request);

class GaaParseFailure : public ParseError {
public:
    GaaParseFailure(const std::string& what, std::string raw) : ParseError(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

// Reads the agent's JSON object (possibly wrapped in prose or a code fence).
// detectionSignal may be a JSON boolean or a "true"/"false" string in any case.
ContextBundle parse_gaa_response(std::string_view raw);

// Summary carried into the next goal-tracking call: empty after a detected
// shift, otherwise the new summary clipped to its last `summary_cap`
// characters.
std::string step_goal_state(const ContextBundle& new_bundle, std::size_t summary_cap = kDefaultSummaryCap);

enum class GaaStatus { ok, parse_failure, backend_failure };

struct GaaOutcome {
    ContextBundle bundle;
    GaaStatus status = GaaStatus::ok;
    int attempts = 0;
    std::string error;

    bool degraded() const { return status != GaaStatus::ok; }
};

struct GaaOptions {
    int max_attempts = 2;  // first call plus one retry
};

// render -> backend -> parse. Never throws for backend or parse trouble:
// after the retries it returns the fail-soft bundle (no goal, inherited
// summary, no shift) and logs the failure.
GaaOutcome adapt_goal(const GaaRequest& request, CompletionBackend& backend, const GaaOptions& options = {});

// Deterministic stand-in for the goal-tracking model. A shift is reported
// when the current question shares no content word with the previous question
// and previous summary; the summary accumulates content words in order of
// first appearance. Optionally sleeps to emulate model latency.
class KeywordShiftGoalBackend : public CompletionBackend {
public:
    explicit KeywordShiftGoalBackend(std::chrono::milliseconds delay = std::chrono::milliseconds(0))
        : delay_(delay) {}

    std::string complete(const std::string& prompt) override;

private:
    std::chrono::milliseconds delay_;
};

// Words ignored by the keyword mock.
bool is_stopword(std::string_view word);

}  // namespace proguide
