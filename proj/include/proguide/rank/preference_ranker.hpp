#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "proguide/core/types.hpp"
#include "proguide/decode/dbs.hpp"

namespace proguide {

// Cosine of term-frequency vectors over word unigrams and bigrams. 0 when
// either side has no words.
double similarity(const std::string& a, const std::string& b);

using SimilarityFn = std::function<double(const std::string&, const std::string&)>;

inline constexpr double kDefaultLambda = 0.5;

struct RankInput {
    CandidateMatrix matrix;  // ce_score filled on every entry
    GuidancePhrase clicked;
    std::string query;
    int k = static_cast<int>(kDefaultGuidanceCount);
    double lambda = kDefaultLambda;
    std::uint64_t seed = 0;
};

// Throws ValidationError when a ce_score is missing or outside [0,1], k < 1
// or lambda outside [0,1].
void validate_rank_input(const RankInput& input);

// Pool member i is the highest-CE entry among the rank-i candidates of all
// groups (ties go to the lower group). Later members whose normalized text
// repeats an earlier one are merged into it, keeping the higher CE.
// Throws ValidationError on an empty matrix or a missing ce_score.
std::vector<GuidancePhrase> group_pool(const CandidateMatrix& matrix);

// Starts from the clicked phrase and greedily adds k-1 pool phrases by
// lambda*CE - (1-lambda)*max similarity to the phrases chosen so far; ties go
// to the higher CE, then the smaller text. A pool copy of the clicked phrase
// is dropped first. Returns nullopt when fewer than k-1 phrases remain.
std::optional<std::vector<GuidancePhrase>> mmr_select(const RankInput& input, const std::vector<GuidancePhrase>& pool,
                                                      const SimilarityFn& sim = similarity);

// Seeded uniform sample of k phrases among `unselected` with CE strictly below
// `preferred_min_ce`, taken from the canonical (text, CE) order so input
// order does not matter. Returns nullopt when fewer than k qualify.
std::optional<std::vector<GuidancePhrase>> sample_dispreferred(const RankInput& input,
                                                               const std::vector<GuidancePhrase>& unselected,
                                                               double preferred_min_ce);

struct RankOutcome {
    std::vector<GuidancePhrase> preferred;  // clicked first
    std::vector<GuidancePhrase> dispreferred;
    std::vector<GuidancePhrase> pool;
    bool skipped = false;
    std::string skip_reason;
};

inline constexpr std::string_view kSkipPoolTooSmall = "pool too small";
inline constexpr std::string_view kSkipTooFewDispreferred = "too few dispreferred candidates";

// Full rank stage: pool, MMR, dispreferred sampling from every matrix entry
// not selected as preferred (deduplicated by normalized text).
RankOutcome rank_candidates(const RankInput& input, const SimilarityFn& sim = similarity);

// Violations of the outcome invariants: disjoint sides and
// max CE(dispreferred) < min CE(preferred without the clicked phrase).
ValidationReport check_outcome(const RankOutcome& outcome, std::size_t k);

// k-pair record over the rendered guidance prompt. Throws ValidationError for
// a skipped outcome or one that breaks the invariants.
PreferenceRecord build_k_pair(const std::string& query, const std::string& answer, const ContextBundle& context,
                              const RankOutcome& outcome, std::size_t k = kDefaultGuidanceCount);

}  // namespace proguide
