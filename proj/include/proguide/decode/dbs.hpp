#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proguide/decode/token_scorer.hpp"

namespace proguide {

struct DbsConfig {
    int num_groups = 4;
    int beams_per_group = 4;
    double diversity_weight = 0.5;
    int ngram_order = 2;
    int max_length = 32;

    // Throws ValidationError on out-of-range fields.
    void validate() const;
};

struct ScoredCandidate {
    TokenSeq tokens;  // includes the trailing end-of-sequence token when present
    std::string text;
    double lm_score = 0.0;       // sum of token log-probs
    double score = 0.0;          // lm_score plus the weighted penalty of its last step
    double penalty_total = 0.0;  // weighted penalties summed over steps
    bool forced = false;         // cut at max_length without end-of-sequence
    bool padded = false;         // repeated to fill a short row
    std::optional<double> ce_score;

    bool operator==(const ScoredCandidate&) const = default;
};

// num_groups rows of beams_per_group candidates, each row best first.
struct CandidateMatrix {
    int num_groups = 0;
    int beams_per_group = 0;
    std::vector<std::vector<ScoredCandidate>> rows;

    const ScoredCandidate& at(int group, int rank) const {
        return rows.at(static_cast<std::size_t>(group)).at(static_cast<std::size_t>(rank));
    }
    ScoredCandidate& at(int group, int rank) {
        return rows.at(static_cast<std::size_t>(group)).at(static_cast<std::size_t>(rank));
    }
    bool empty() const { return rows.empty() || rows.front().empty(); }
    bool any_forced() const;

    bool operator==(const CandidateMatrix&) const = default;
};

// Minus the number of distinct n-grams of order 1..n present in both
// sequences. Symmetric, never positive.
double ngram_penalty(std::span<const TokenId> a, std::span<const TokenId> b, int n);

// Sum of ngram_penalty between `candidate` and every member of `group`.
// Throws ValidationError when the group is empty.
double dissimilarity(std::span<const TokenId> candidate, const std::vector<TokenSeq>& group, int n);

// Group-sequential diverse beam search. At every step group g ranks its
// extensions by lm_score + diversity_weight * dissimilarity(extension,
// extensions already chosen at this step by groups < g); ties go to the
// lexicographically smaller token sequence. Extensions ending in
// end-of-sequence move to the group's finished pool, beams still open at
// max_length are force-terminated. Each row holds the group's best
// beams_per_group finished candidates. Penalties ignore the end-of-sequence
// token.
CandidateMatrix dbs_decode(const TokenScorer& scorer, std::span<const TokenId> prompt, const DbsConfig& config);

// Plain beam search of the given width, same finishing and tie rules.
std::vector<ScoredCandidate> beam_search(const TokenScorer& scorer, std::span<const TokenId> prompt, int beam_width,
                                         int max_length);

void to_json(nlohmann::json& j, const ScoredCandidate& candidate);
void from_json(const nlohmann::json& j, ScoredCandidate& candidate);
void to_json(nlohmann::json& j, const CandidateMatrix& matrix);
void from_json(const nlohmann::json& j, CandidateMatrix& matrix);

}  // namespace proguide
