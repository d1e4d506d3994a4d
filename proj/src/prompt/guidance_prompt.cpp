#include "proguide/prompt/guidance_prompt.hpp"

#include <cctype>

#include "proguide/core/text.hpp"

namespace proguide {

namespace {

constexpr std::string_view kNone = "(none)";

constexpr std::string_view kBackground = R"(Background:
As a Proactive Guidance Model, you are tasked with enhancing user experience in a multi-turn dialogue system by predicting potential future inquiries. Through careful analysis of the current and past interactions, you will help drive the conversation towards fulfilling the user's objectives.

Input Explanation:
The following elements are provided for your analysis:
- Current round's user query ([Q]).
- The corresponding system's answer ([A]).
- Contextual information from previous rounds, which includes:
  - A summary of the dialogue thus far ([S]).
  - Explicit goal analysis, detailing the objectives and needs of the user ([E]).

Thought Process:
In predicting the user's next questions, you should:
1. Assess if the current round's answer ([A_n]) has adequately addressed the user's query ([Q_n]).
2. Utilize the contextual information, particularly the summary and explicit goal analysis, to comprehend the user's continuous journey and objectives within the dialogue.
3. Anticipate the user's potential next steps by considering the dialogue's progression and any identified goals or needs.
)";

std::string or_none(const std::string& value) { return trim(value).empty() ? std::string(kNone) : value; }

void append_slot(std::string& out, std::string_view header, const std::string& value) {
    out.append(header);
    out.push_back('\n');
    out.append(value);
    out.push_back('\n');
}

std::string render(const std::string& query, const std::string& answer, const ContextBundle& context,
                   std::size_t count, bool with_reasoning) {
    const std::string n = std::to_string(count);
    std::string out(kBackground);
    out += "4. Generate " + n + " relevant and contextually appropriate questions as guidance that the user might ask next.\n\n";
    out += "Output Format Requirements:\nPresent your predictions structured as follows:\n";
    if (with_reasoning) {
        out += std::string(kCotHeader) + "\n<your reasoning>\n" + std::string(kGuidanceHeader) + "\n";
    }
    out += "Guidance_1\\n...\\nGuidance_" + n + "\n\nInputs:\n";
    append_slot(out, kSlotQuery, query);
    append_slot(out, kSlotAnswer, answer);
    append_slot(out, kSlotSummary, or_none(context.summary));
    append_slot(out, kSlotGoal, or_none(context.explicit_goal));
    return out;
}

std::string strip_list_marker(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return trim(line.substr(i + 1));
    if (!line.empty() && (line[0] == '-' || line[0] == '*')) return trim(line.substr(1));
    return line;
}

}  // namespace

std::string render_guidance_prompt(const std::string& query, const std::string& answer,
                                   const ContextBundle& context, std::size_t k) {
    return render(query, answer, context, k, false);
}

std::string render_teacher_prompt(const std::string& query, const std::string& answer,
                                  const ContextBundle& context, std::size_t n) {
    return render(query, answer, context, n, true);
}

TeacherResponse parse_teacher_response(std::string_view raw) {
    const std::string text(raw);
    auto cot = text.find(kCotHeader);
    auto guidance = text.find(kGuidanceHeader);
    if (cot == std::string::npos || guidance == std::string::npos || guidance < cot) {
        throw ParseError("teacher response lacks [CoT] and [Guidance] sections");
    }
    TeacherResponse out;
    out.chain_of_thought = trim(text.substr(cot + kCotHeader.size(), guidance - cot - kCotHeader.size()));
    for (const auto& line : split_lines(text.substr(guidance + kGuidanceHeader.size()))) {
        auto phrase = strip_list_marker(trim(line));
        if (!phrase.empty()) out.candidates.push_back(std::move(phrase));
    }
    if (out.chain_of_thought.empty()) throw ParseError("teacher response has an empty [CoT] section");
    if (out.candidates.empty()) throw ParseError("teacher response has no guidance candidates");
    return out;
}

}  // namespace proguide
