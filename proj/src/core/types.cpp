#include "proguide/core/types.hpp"

#include <algorithm>
#include <set>

#include "proguide/core/text.hpp"

namespace proguide {

namespace {

void add(ValidationReport& report, std::string where, std::string message) {
    report.push_back({std::move(where), std::move(message)});
}

void append(ValidationReport& into, ValidationReport&& from) {
    into.insert(into.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) + 1;
}

}  // namespace

ValidationReport validate_phrase(const GuidancePhrase& phrase, const std::string& where) {
    ValidationReport report;
    if (trim(phrase.text).empty()) add(report, where, "empty guidance text");
    if (phrase.ce_score && !(*phrase.ce_score >= 0.0 && *phrase.ce_score <= 1.0)) {
        add(report, where, "ce_score outside [0,1]");
    }
    return report;
}

ValidationReport validate_context(const ContextBundle& context, const ValidationLimits& limits,
                                  const std::string& where) {
    ValidationReport report;
    if (utf8_length(context.summary) > limits.summary_cap) {
        add(report, where, "summary exceeds cap of " + std::to_string(limits.summary_cap) + " characters");
    }
    return report;
}

ValidationReport validate_turn(const Turn& turn, const ValidationLimits& limits, const std::string& where) {
    ValidationReport report;
    if (turn.index < 1) add(report, where, "turn index must be >= 1");
    append(report, validate_context(turn.context, limits, where + ".context"));
    if (turn.guidance.size() != limits.guidance_count) {
        add(report, where, "expected " + std::to_string(limits.guidance_count) + " guidance phrases, found " +
                               std::to_string(turn.guidance.size()));
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < turn.guidance.size(); ++i) {
        std::string path = where + ".guidance[" + std::to_string(i) + "]";
        append(report, validate_phrase(turn.guidance[i], path));
        if (!seen.insert(normalize_phrase(turn.guidance[i].text)).second) {
            add(report, path, "duplicate guidance text");
        }
    }
    if (turn.clicked_index &&
        (*turn.clicked_index < 0 || static_cast<std::size_t>(*turn.clicked_index) >= turn.guidance.size())) {
        add(report, where, "clicked_index out of range");
    }
    return report;
}

ValidationReport validate_session(const Session& session, const ValidationLimits& limits) {
    ValidationReport report;
    for (std::size_t i = 0; i < session.turns.size(); ++i) {
        const Turn& turn = session.turns[i];
        std::string where = "turns[" + std::to_string(i) + "]";
        if (turn.index != static_cast<int>(i) + 1) {
            add(report, where, "non-contiguous turn indices");
        }
        append(report, validate_turn(turn, limits, where));
    }
    const std::string expected = session.turns.empty() ? std::string() : session.turns.back().context.summary;
    if (session.current_summary != expected) {
        add(report, "current_summary", "current_summary does not match the latest turn's summary");
    }
    return report;
}

ValidationReport validate_preference_record(const PreferenceRecord& record, std::size_t guidance_count) {
    ValidationReport report;
    if (record.chosen == record.rejected) add(report, "record", "chosen equals rejected");
    if (record.arity == PairArity::k_pair) {
        if (count_lines(record.chosen) != guidance_count) {
            add(report, "record.chosen", "k-pair chosen must hold exactly " + std::to_string(guidance_count) +
                                             " phrases");
        }
        if (count_lines(record.rejected) != guidance_count) {
            add(report, "record.rejected", "k-pair rejected must hold exactly " +
                                               std::to_string(guidance_count) + " phrases");
        }
    } else {
        if (record.chosen.find('\n') != std::string::npos || record.rejected.find('\n') != std::string::npos) {
            add(report, "record", "one-pair record must hold single phrases");
        }
    }
    for (const auto& line : split_lines(record.chosen)) {
        if (trim(line).empty()) add(report, "record.chosen", "empty guidance text");
    }
    for (const auto& line : split_lines(record.rejected)) {
        if (trim(line).empty()) add(report, "record.rejected", "empty guidance text");
    }
    return report;
}

bool report_mentions(const ValidationReport& report, const std::string& needle) {
    return std::any_of(report.begin(), report.end(),
                       [&](const Violation& v) { return v.message.find(needle) != std::string::npos; });
}

std::string to_string(PhraseOrigin origin) {
    switch (origin) {
        case PhraseOrigin::decoded: return "decoded";
        case PhraseOrigin::clicked_history: return "clicked-history";
        case PhraseOrigin::fixture: return "fixture";
    }
    return "decoded";
}

PhraseOrigin phrase_origin_from_string(const std::string& text) {
    if (text == "decoded") return PhraseOrigin::decoded;
    if (text == "clicked-history") return PhraseOrigin::clicked_history;
    if (text == "fixture") return PhraseOrigin::fixture;
    throw ParseError("unknown phrase origin: " + text);
}

std::string to_string(PairArity arity) { return arity == PairArity::one_pair ? "one-pair" : "k-pair"; }

PairArity pair_arity_from_string(const std::string& text) {
    if (text == "one-pair") return PairArity::one_pair;
    if (text == "k-pair") return PairArity::k_pair;
    throw ParseError("unknown pair arity: " + text);
}

}  // namespace proguide
