#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace proguide {

// Number of guidance phrases served per turn.
inline constexpr std::size_t kDefaultGuidanceCount = 3;
inline constexpr std::size_t kDefaultSummaryCap = 2048;

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PhraseOrigin { decoded, clicked_history, fixture };

struct GuidancePhrase {
    std::string text;
    std::optional<double> ce_score;
    PhraseOrigin origin = PhraseOrigin::decoded;

    bool operator==(const GuidancePhrase&) const = default;
};

// The goal-adaptation output carried into guidance generation: explicit goal
// analysis, goal-relevant summary and the shift signal.
struct ContextBundle {
    std::string explicit_goal;
    std::string summary;
    bool shift_detected = false;

    bool operator==(const ContextBundle&) const = default;
};

struct Turn {
    int index = 1;  // 1-based round number
    std::string query;
    std::string answer;
    ContextBundle context;
    std::vector<GuidancePhrase> guidance;
    std::optional<int> clicked_index;  // 0-based

    bool operator==(const Turn&) const = default;
};

struct Session {
    std::string id;
    std::vector<Turn> turns;
    std::string current_summary;

    bool operator==(const Session&) const = default;
};

struct ClickEvent {
    std::string session_id;
    int turn_index = 1;
    int guidance_index = 0;
    std::int64_t timestamp_ms = 0;

    bool operator==(const ClickEvent&) const = default;
};

enum class PairArity { one_pair, k_pair };

struct PreferenceRecord {
    std::string input;  // rendered prompt x
    std::string chosen;
    std::string rejected;
    PairArity arity = PairArity::k_pair;

    bool operator==(const PreferenceRecord&) const = default;
};

struct AnnotationRecord {
    std::string session_id;
    int turn_index = 1;
    bool relevance = false;
    bool applicability = false;
    bool diversity = false;
    bool redline_violation = false;

    bool meets_offline_criteria() const {
        return relevance && applicability && diversity && !redline_violation;
    }

    bool operator==(const AnnotationRecord&) const = default;
};

struct Violation {
    std::string where;    // e.g. "turns[1].guidance[2]"
    std::string message;  // stable, greppable text
};

using ValidationReport = std::vector<Violation>;

struct ValidationLimits {
    std::size_t guidance_count = kDefaultGuidanceCount;
    std::size_t summary_cap = kDefaultSummaryCap;
};

ValidationReport validate_phrase(const GuidancePhrase& phrase, const std::string& where = "phrase");
ValidationReport validate_context(const ContextBundle& context, const ValidationLimits& limits = {},
                                  const std::string& where = "context");
ValidationReport validate_turn(const Turn& turn, const ValidationLimits& limits = {},
                               const std::string& where = "turn");
ValidationReport validate_session(const Session& session, const ValidationLimits& limits = {});
ValidationReport validate_preference_record(const PreferenceRecord& record,
                                            std::size_t guidance_count = kDefaultGuidanceCount);

// True when `report` has a violation whose message contains `needle`.
bool report_mentions(const ValidationReport& report, const std::string& needle);

std::string to_string(PhraseOrigin origin);
PhraseOrigin phrase_origin_from_string(const std::string& text);
std::string to_string(PairArity arity);
PairArity pair_arity_from_string(const std::string& text);

}  // namespace proguide
