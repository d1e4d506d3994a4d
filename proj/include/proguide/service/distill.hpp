#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proguide/backend/completion.hpp"
#include "proguide/core/types.hpp"
#include "proguide/train/objectives.hpp"

namespace proguide {

// One conversation turn to distil: (Q, A, C).
struct DistillInput {
    std::string id;
    std::string query;
    std::string answer;
    ContextBundle context;
    bool operator==(const DistillInput&) const = default;
};

// Teacher output for one input. Flagged records keep the raw reply and are
// never exported.
struct DistillCandidate {
    std::string id;
    DistillInput input;
    std::string chain_of_thought;
    std::vector<std::string> candidates;
    bool flagged = false;
    std::string flag_reason;
    std::string raw;
    bool operator==(const DistillCandidate&) const = default;
};

// Human selection for one record: 1-based positions of the kept candidates.
struct DistillSelection {
    std::string id;
    std::vector<int> keep;
    bool operator==(const DistillSelection&) const = default;
};

void to_json(nlohmann::json& j, const DistillInput& input);
void from_json(const nlohmann::json& j, DistillInput& input);
void to_json(nlohmann::json& j, const DistillCandidate& candidate);
void from_json(const nlohmann::json& j, DistillCandidate& candidate);
void to_json(nlohmann::json& j, const DistillSelection& selection);
void from_json(const nlohmann::json& j, DistillSelection& selection);

// Asks the teacher for n candidates per input. Parse failures, backend
// failures and replies with a candidate count other than n (or with repeated
// candidates) are flagged. Throws ValidationError unless n > k.
std::vector<DistillCandidate> generate_distillation_set(const std::vector<DistillInput>& inputs,
                                                        CompletionBackend& teacher, std::size_t n,
                                                        std::size_t k = kDefaultGuidanceCount);

struct SftExport {
    std::vector<SftSample> samples;
    std::vector<std::pair<std::string, std::string>> rejected;  // (id, reason)
};

// SFT records for every selected, unflagged candidate set: the guidance
// prompt as input and the k kept phrases, newline-joined, as response. The
// chain of thought is dropped. Selections that do not name exactly k
// distinct in-range positions are rejected.
SftExport export_sft(const std::vector<DistillCandidate>& candidates, const std::vector<DistillSelection>& selections,
                     std::size_t k = kDefaultGuidanceCount);

}  // namespace proguide
