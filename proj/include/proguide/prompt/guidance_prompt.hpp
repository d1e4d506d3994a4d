#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "proguide/core/types.hpp"

namespace proguide {

// Slot headers closing the guidance prompt, one per line, each followed by
// its value.
inline constexpr std::string_view kSlotQuery = "[Q]:";
inline constexpr std::string_view kSlotAnswer = "[A]:";
inline constexpr std::string_view kSlotSummary = "[S]:";
inline constexpr std::string_view kSlotGoal = "[E]:";

// Prompt x for guidance generation and preference records. Empty summary or
// goal render as "(none)".
std::string render_guidance_prompt(const std::string& query, const std::string& answer,
                                   const ContextBundle& context, std::size_t k = kDefaultGuidanceCount);

// Teacher prompt for distillation: the guidance prompt asking for n
// candidates, preceded by a written reasoning section.
std::string render_teacher_prompt(const std::string& query, const std::string& answer,
                                  const ContextBundle& context, std::size_t n);

inline constexpr std::string_view kCotHeader = "[CoT]";
inline constexpr std::string_view kGuidanceHeader = "[Guidance]";

struct TeacherResponse {
    std::string chain_of_thought;
    std::vector<std::string> candidates;
};

// Parses "[CoT]\n<reasoning>\n[Guidance]\n<one candidate per line>". Leading
// list markers ("1.", "-", "*") are stripped from candidates; blank lines are
// ignored. Throws ParseError when a section is missing or empty.
TeacherResponse parse_teacher_response(std::string_view raw);

}  // namespace proguide
