#include "proguide/service/distill.hpp"

#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "proguide/core/json_io.hpp"
#include "proguide/core/text.hpp"
#include "proguide/prompt/guidance_prompt.hpp"

namespace proguide {

void to_json(nlohmann::json& j, const DistillInput& in) {
    j = {{"id", in.id}, {"query", in.query}, {"answer", in.answer}, {"context", in.context}};
}

void from_json(const nlohmann::json& j, DistillInput& in) {
    in.id = j.at("id").get<std::string>();
    in.query = j.at("query").get<std::string>();
    in.answer = j.at("answer").get<std::string>();
    in.context = j.contains("context") ? j.at("context").get<ContextBundle>() : ContextBundle{};
}

void to_json(nlohmann::json& j, const DistillCandidate& c) {
    j = {{"id", c.id},
         {"input", c.input},
         {"chain_of_thought", c.chain_of_thought},
         {"candidates", c.candidates},
         {"flagged", c.flagged},
         {"flag_reason", c.flag_reason},
         {"raw", c.raw}};
}

void from_json(const nlohmann::json& j, DistillCandidate& c) {
    c.id = j.at("id").get<std::string>();
    c.input = j.at("input").get<DistillInput>();
    c.chain_of_thought = j.at("chain_of_thought").get<std::string>();
    c.candidates = j.at("candidates").get<std::vector<std::string>>();
    c.flagged = j.at("flagged").get<bool>();
    c.flag_reason = j.at("flag_reason").get<std::string>();
    c.raw = j.at("raw").get<std::string>();
}

void to_json(nlohmann::json& j, const DistillSelection& s) { j = {{"id", s.id}, {"keep", s.keep}}; }

void from_json(const nlohmann::json& j, DistillSelection& s) {
    s.id = j.at("id").get<std::string>();
    s.keep = j.at("keep").get<std::vector<int>>();
}

std::vector<DistillCandidate> generate_distillation_set(const std::vector<DistillInput>& inputs,
                                                        CompletionBackend& teacher, std::size_t n, std::size_t k) {
    if (k < 1 || n <= k) throw ValidationError("teacher candidate count n must exceed k");
    std::vector<DistillCandidate> out;
    for (const auto& input : inputs) {
        DistillCandidate c;
        c.id = input.id;
        c.input = input;
        try {
            c.raw = teacher.complete(render_teacher_prompt(input.query, input.answer, input.context, n));
            auto parsed = parse_teacher_response(c.raw);
            c.chain_of_thought = std::move(parsed.chain_of_thought);
            c.candidates = std::move(parsed.candidates);
            std::set<std::string> distinct;
            for (const auto& text : c.candidates) distinct.insert(normalize_phrase(text));
            if (c.candidates.size() != n) {
                c.flagged = true;
                c.flag_reason = "expected " + std::to_string(n) + " candidates, got " + std::to_string(c.candidates.size());
            } else if (distinct.size() != c.candidates.size()) {
                c.flagged = true;
                c.flag_reason = "repeated candidates";
            }
        } catch (const ParseError& e) {
            c.flagged = true;
            c.flag_reason = std::string("parse failure: ") + e.what();
        } catch (const BackendError& e) {
            c.flagged = true;
            c.flag_reason = std::string("teacher failure: ") + e.what();
        }
        if (c.flagged) spdlog::warn("distillation record {} flagged: {}", c.id, c.flag_reason);
        out.push_back(std::move(c));
    }
    return out;
}

SftExport export_sft(const std::vector<DistillCandidate>& candidates, const std::vector<DistillSelection>& selections,
                     std::size_t k) {
    std::map<std::string, const DistillSelection*> by_id;
    for (const auto& s : selections) by_id[s.id] = &s;

    SftExport out;
    for (const auto& c : candidates) {
        auto it = by_id.find(c.id);
        if (it == by_id.end()) continue;  // not reviewed
        const auto& keep = it->second->keep;
        if (c.flagged) {
            out.rejected.emplace_back(c.id, "flagged: " + c.flag_reason);
            continue;
        }
        if (keep.size() != k) {
            out.rejected.emplace_back(c.id, "selection keeps " + std::to_string(keep.size()) + " phrases, expected " +
                                                std::to_string(k));
            continue;
        }
        std::set<int> seen;
        std::vector<std::string> kept;
        std::string problem;
        for (int pos : keep) {
            if (pos < 1 || pos > static_cast<int>(c.candidates.size())) {
                problem = "selection position out of range: " + std::to_string(pos);
                break;
            }
            if (!seen.insert(pos).second) {
                problem = "selection repeats position " + std::to_string(pos);
                break;
            }
            kept.push_back(c.candidates[static_cast<std::size_t>(pos - 1)]);
        }
        if (!problem.empty()) {
            out.rejected.emplace_back(c.id, problem);
            continue;
        }
        out.samples.push_back(
            {render_guidance_prompt(c.input.query, c.input.answer, c.input.context, k), join(kept, "\n")});
    }
    return out;
}

}  // namespace proguide
