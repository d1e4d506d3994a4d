#include <gtest/gtest.h>

#include <filesystem>

#include "proguide/core/json_io.hpp"
#include "proguide/goal/gaa.hpp"
#include "proguide/prompt/guidance_prompt.hpp"
#include "support/backends.hpp"

using namespace proguide;
using proguide::test_support::FunctionBackend;

namespace {

GaaRequest round2(const std::string& query, const std::string& prev_query, const std::string& prev_answer) {
    return GaaRequest{query, QaPair{prev_query, prev_answer}, std::nullopt, 2};
}

std::string slot_value(const std::string& prompt, std::string_view header) {
    auto pos = prompt.rfind("\n" + std::string(header) + "\n");
    if (pos == std::string::npos) return "<missing>";
    auto start = pos + header.size() + 2;
    auto end = prompt.find('\n', start);
    return prompt.substr(start, end - start);
}

}  // namespace

TEST(GaaPrompt, EmbedsTemplateAndPreviousPair) {
    auto prompt = render_gaa_prompt(round2("stock tips", "food allergy?", "avoid peanuts"));
    EXPECT_NE(prompt.find("Explicit Goal Analysis"), std::string::npos);
    EXPECT_NE(prompt.find("Goal-relevant Summary"), std::string::npos);
    EXPECT_NE(prompt.find("Detection Signal"), std::string::npos);
    EXPECT_EQ(slot_value(prompt, kSlotCurrentQuery), "stock tips");
    EXPECT_EQ(slot_value(prompt, kSlotPreviousQuery), "food allergy?");
    EXPECT_EQ(slot_value(prompt, kSlotPreviousAnswer), "avoid peanuts");
    EXPECT_EQ(slot_value(prompt, kSlotPreviousSummary), "(none)");
}

TEST(GaaPrompt, EmptySummaryAfterResetRendersNone) {
    GaaRequest r{"bond yields", QaPair{"stock tips", "diversify"}, std::string(), 3};
    EXPECT_EQ(slot_value(render_gaa_prompt(r), kSlotPreviousSummary), "(none)");
    r.previous_summary = "stocks tips";
    EXPECT_EQ(slot_value(render_gaa_prompt(r), kSlotPreviousSummary), "stocks tips");
}

TEST(GaaPrompt, IsPure) {
    GaaRequest r{"bond yields", QaPair{"stock tips", "diversify"}, std::string("stocks"), 4};
    EXPECT_EQ(render_gaa_prompt(r), render_gaa_prompt(r));
}

TEST(GaaPrompt, RejectsMalformedRequests) {
    EXPECT_THROW(render_gaa_prompt(GaaRequest{"q", QaPair{"a", "b"}, std::nullopt, 1}), ValidationError);
    EXPECT_THROW(render_gaa_prompt(GaaRequest{"q", std::nullopt, std::nullopt, 2}), ValidationError);
    EXPECT_THROW(render_gaa_prompt(GaaRequest{"q", QaPair{"a", "b"}, std::string("s"), 2}), ValidationError);
    EXPECT_THROW(render_gaa_prompt(GaaRequest{"q", QaPair{"a", "b"}, std::nullopt, 3}), ValidationError);
    EXPECT_THROW(render_gaa_prompt(GaaRequest{"q", std::nullopt, std::nullopt, 0}), ValidationError);
    EXPECT_NO_THROW(validate_gaa_request(GaaRequest{"q", std::nullopt, std::nullopt, 1}));
}

TEST(GaaParse, MapsFields) {
    auto b = parse_gaa_response(
        R"({"explicitGoalAnalysis":"user now asks about stocks","goalRelevantSummary":"","detectionSignal":true})");
    EXPECT_EQ(b, (ContextBundle{"user now asks about stocks", "", true}));
}

TEST(GaaParse, AcceptsStringSignalsAndSurroundingProse) {
    auto b = parse_gaa_response("Sure:\n```json\n{\"explicitGoalAnalysis\":\"e\",\"goalRelevantSummary\":\"s\","
                                "\"detectionSignal\":\"True\"}\n```");
    EXPECT_TRUE(b.shift_detected);
    auto f = parse_gaa_response(R"({"explicitGoalAnalysis":"e","goalRelevantSummary":"s","detectionSignal":"FALSE"})");
    EXPECT_FALSE(f.shift_detected);
}

TEST(GaaParse, FailuresCarryRawText) {
    try {
        parse_gaa_response("sorry, I cannot");
        FAIL() << "expected GaaParseFailure";
    } catch (const GaaParseFailure& e) {
        EXPECT_EQ(e.raw(), "sorry, I cannot");
    }
    EXPECT_THROW(parse_gaa_response(R"({"explicitGoalAnalysis":"e","detectionSignal":true})"), GaaParseFailure);
    EXPECT_THROW(parse_gaa_response(R"({"explicitGoalAnalysis":"e","goalRelevantSummary":"s","detectionSignal":"maybe"})"),
                 GaaParseFailure);
    EXPECT_THROW(parse_gaa_response(R"({"explicitGoalAnalysis":"e","goalRelevantSummary":"s","detectionSignal":1})"),
                 GaaParseFailure);
    EXPECT_THROW(parse_gaa_response("{not json}"), ParseError);
}

TEST(GoalState, ResetOnShiftOtherwiseCarry) {
    EXPECT_EQ(step_goal_state({"e", "old context", true}), "");
    EXPECT_EQ(step_goal_state({"e", "goal: stock basics", false}), "goal: stock basics");
    EXPECT_EQ(step_goal_state({"e", "", true}), "");
    EXPECT_EQ(step_goal_state({"e", "abcdef", false}, 3), "def");
}

TEST(AdaptGoal, PassesFixtureThrough) {
    auto request = round2("stock tips", "food allergy?", "avoid peanuts");
    FileCompletionBackend backend(std::map<std::string, std::string>{
        {prompt_key(render_gaa_prompt(request)),
         R"({"explicitGoalAnalysis":"stocks","goalRelevantSummary":"stocks","detectionSignal":true})"}});
    auto outcome = adapt_goal(request, backend);
    EXPECT_FALSE(outcome.degraded());
    EXPECT_EQ(outcome.bundle, (ContextBundle{"stocks", "stocks", true}));
    EXPECT_EQ(outcome.attempts, 1);
}

TEST(AdaptGoal, GarbageFallsBackAfterOneRetry) {
    FunctionBackend backend([](const std::string&) { return "garbage"; });
    GaaRequest r{"bond yields", QaPair{"stock tips", "diversify"}, std::string("stocks"), 3};
    auto outcome = adapt_goal(r, backend);
    EXPECT_EQ(outcome.status, GaaStatus::parse_failure);
    EXPECT_EQ(outcome.bundle, (ContextBundle{"", "stocks", false}));
    EXPECT_EQ(backend.calls(), 2);
}

TEST(AdaptGoal, RetrySucceedsAfterTransportError) {
    int calls = 0;
    FunctionBackend backend([&](const std::string&) -> std::string {
        if (++calls == 1) throw BackendError("timeout");
        return R"({"explicitGoalAnalysis":"e","goalRelevantSummary":"s","detectionSignal":false})";
    });
    auto outcome = adapt_goal(round2("q", "p", "a"), backend);
    EXPECT_EQ(outcome.status, GaaStatus::ok);
    EXPECT_EQ(outcome.attempts, 2);
}

TEST(AdaptGoal, TransportFailureIsFlagged) {
    FunctionBackend backend([](const std::string&) -> std::string { throw BackendError("refused"); });
    auto outcome = adapt_goal(round2("q", "p", "a"), backend);
    EXPECT_EQ(outcome.status, GaaStatus::backend_failure);
    EXPECT_TRUE(outcome.degraded());
    EXPECT_EQ(outcome.bundle, (ContextBundle{"", "", false}));
}

TEST(AdaptGoal, RoundOneIsNeverAdapted) {
    FunctionBackend backend([](const std::string&) { return std::string(); });
    EXPECT_THROW(adapt_goal(GaaRequest{"q", std::nullopt, std::nullopt, 1}, backend), ValidationError);
    EXPECT_EQ(backend.calls(), 0);
}

TEST(KeywordMock, ContinuingTopicIsNoShift) {
    KeywordShiftGoalBackend backend;
    auto outcome = adapt_goal(round2("best stocks for beginners", "how do stocks work", "shares of companies"), backend);
    ASSERT_FALSE(outcome.degraded());
    EXPECT_FALSE(outcome.bundle.shift_detected);
    EXPECT_EQ(outcome.bundle.summary, "stocks work best beginners");
    EXPECT_EQ(outcome.bundle.explicit_goal, "user asks about best stocks beginners");
}

TEST(KeywordMock, NewTopicIsShift) {
    KeywordShiftGoalBackend backend;
    GaaRequest r{"peanut allergy symptoms", QaPair{"how do stocks work", "shares"}, std::string("stocks work"), 3};
    auto outcome = adapt_goal(r, backend);
    EXPECT_TRUE(outcome.bundle.shift_detected);
    EXPECT_EQ(step_goal_state(outcome.bundle), "");
}

TEST(KeywordMock, IgnoresAnswerSlot) {
    KeywordShiftGoalBackend backend;
    auto a = adapt_goal(round2("bond yields", "stock tips", "bond yields matter"), backend);
    auto b = adapt_goal(round2("bond yields", "stock tips", "nothing related"), backend);
    EXPECT_EQ(a.bundle, b.bundle);
    EXPECT_TRUE(a.bundle.shift_detected);
}

TEST(GuidancePrompt, RendersSlotsAndK) {
    auto prompt = render_guidance_prompt("how do bonds work", "they pay interest", {"user asks about bonds", "", false}, 3);
    EXPECT_NE(prompt.find("Proactive Guidance Model"), std::string::npos);
    EXPECT_NE(prompt.find("Generate 3 relevant"), std::string::npos);
    EXPECT_EQ(slot_value(prompt, kSlotQuery), "how do bonds work");
    EXPECT_EQ(slot_value(prompt, kSlotAnswer), "they pay interest");
    EXPECT_EQ(slot_value(prompt, kSlotSummary), "(none)");
    EXPECT_EQ(slot_value(prompt, kSlotGoal), "user asks about bonds");
    EXPECT_NE(render_teacher_prompt("q", "a", {}, 5).find("[CoT]"), std::string::npos);
}

TEST(GuidancePrompt, ParsesTeacherResponse) {
    auto r = parse_teacher_response("[CoT]\nthe user wants bonds\n[Guidance]\n1. what are bond yields\n- are bonds safe\n\nbond etfs\n");
    EXPECT_EQ(r.chain_of_thought, "the user wants bonds");
    EXPECT_EQ(r.candidates, (std::vector<std::string>{"what are bond yields", "are bonds safe", "bond etfs"}));
    EXPECT_THROW(parse_teacher_response("no sections"), ParseError);
    EXPECT_THROW(parse_teacher_response("[CoT]\n\n[Guidance]\na\n"), ParseError);
    EXPECT_THROW(parse_teacher_response("[CoT]\nx\n[Guidance]\n\n"), ParseError);
}

TEST(FileBackend, LoadsCannedResponsesAndFallback) {
    auto path = std::filesystem::temp_directory_path() / "proguide_test_goal" / "canned.jsonl";
    write_text_file(path, "{\"prompt_hash\":\"" + prompt_key("hello") + "\",\"completion\":\"hi\"}\n" +
                              "{\"prompt_hash\":\"*\",\"completion\":\"fallback\"}\n");
    FileCompletionBackend backend(path);
    EXPECT_EQ(backend.complete("hello"), "hi");
    EXPECT_EQ(backend.complete("other"), "fallback");
    FileCompletionBackend strict(std::map<std::string, std::string>{});
    EXPECT_THROW(strict.complete("x"), BackendError);
}
