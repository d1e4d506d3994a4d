#include "proguide/rank/preference_ranker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "proguide/core/random.hpp"
#include "proguide/core/text.hpp"
#include "proguide/prompt/guidance_prompt.hpp"

namespace proguide {

namespace {

std::map<std::string, double> term_vector(const std::string& text) {
    std::map<std::string, double> tf;
    auto words = split_words(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
        tf["1:" + words[i]] += 1.0;
        if (i + 1 < words.size()) tf["2:" + words[i] + " " + words[i + 1]] += 1.0;
    }
    return tf;
}

double ce_of(const GuidancePhrase& phrase) {
    if (!phrase.ce_score) throw ValidationError("candidate '" + phrase.text + "' has no ce_score");
    return *phrase.ce_score;
}

GuidancePhrase as_phrase(const ScoredCandidate& c) {
    return GuidancePhrase{c.text, c.ce_score, PhraseOrigin::decoded};
}

}  // namespace

double similarity(const std::string& a, const std::string& b) {
    auto va = term_vector(a);
    auto vb = term_vector(b);
    if (va.empty() || vb.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [term, w] : va) {
        na += w * w;
        if (auto it = vb.find(term); it != vb.end()) dot += w * it->second;
    }
    for (const auto& [term, w] : vb) nb += w * w;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

void validate_rank_input(const RankInput& input) {
    if (input.k < 1) throw ValidationError("k must be >= 1");
    if (!(input.lambda >= 0.0 && input.lambda <= 1.0)) throw ValidationError("lambda must be in [0,1]");
    for (const auto& row : input.matrix.rows) {
        for (const auto& c : row) {
            if (!c.ce_score) throw ValidationError("candidate '" + c.text + "' has no ce_score");
            if (!(*c.ce_score >= 0.0 && *c.ce_score <= 1.0)) throw ValidationError("ce_score outside [0,1]");
        }
    }
}

std::vector<GuidancePhrase> group_pool(const CandidateMatrix& matrix) {
    if (matrix.empty()) throw ValidationError("cannot pool an empty candidate matrix");
    std::vector<GuidancePhrase> pool;
    std::map<std::string, std::size_t> by_text;
    for (std::size_t rank = 0; rank < matrix.rows.front().size(); ++rank) {
        const ScoredCandidate* best = nullptr;
        for (const auto& row : matrix.rows) {
            if (rank >= row.size()) continue;
            const auto& c = row[rank];
            if (!c.ce_score) throw ValidationError("candidate '" + c.text + "' has no ce_score");
            if (!best || *c.ce_score > *best->ce_score) best = &c;
        }
        if (!best) continue;
        auto key = normalize_phrase(best->text);
        if (auto it = by_text.find(key); it != by_text.end()) {
            auto& kept = pool[it->second];
            if (*best->ce_score > *kept.ce_score) kept = as_phrase(*best);
            continue;
        }
        by_text.emplace(key, pool.size());
        pool.push_back(as_phrase(*best));
    }
    return pool;
}

std::optional<std::vector<GuidancePhrase>> mmr_select(const RankInput& input, const std::vector<GuidancePhrase>& pool,
                                                      const SimilarityFn& sim) {
    const auto wanted = static_cast<std::size_t>(std::max(input.k, 1) - 1);
    std::vector<GuidancePhrase> selected{input.clicked};
    if (wanted == 0) return selected;

    const auto clicked_key = normalize_phrase(input.clicked.text);
    std::vector<GuidancePhrase> remaining;
    for (const auto& p : pool) {
        if (normalize_phrase(p.text) != clicked_key) remaining.push_back(p);
    }
    if (remaining.size() < wanted) return std::nullopt;

    // max similarity of every remaining phrase to the selected set so far
    std::vector<double> max_sim(remaining.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) max_sim[i] = sim(remaining[i].text, input.clicked.text);

    std::vector<bool> taken(remaining.size(), false);
    for (std::size_t pick = 0; pick < wanted; ++pick) {
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (taken[i]) continue;
            const double ce = ce_of(remaining[i]);
            const double score = input.lambda * ce - (1.0 - input.lambda) * max_sim[i];
            if (!best) {
                best = i;
                best_score = score;
                continue;
            }
            const double best_ce = ce_of(remaining[*best]);
            if (score > best_score || (score == best_score && (ce > best_ce || (ce == best_ce && remaining[i].text < remaining[*best].text)))) {
                best = i;
                best_score = score;
            }
        }
        taken[*best] = true;
        selected.push_back(remaining[*best]);
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (!taken[i]) max_sim[i] = std::max(max_sim[i], sim(remaining[i].text, remaining[*best].text));
        }
    }
    return selected;
}

std::optional<std::vector<GuidancePhrase>> sample_dispreferred(const RankInput& input,
                                                               const std::vector<GuidancePhrase>& unselected,
                                                               double preferred_min_ce) {
    const auto k = static_cast<std::size_t>(std::max(input.k, 1));
    std::vector<GuidancePhrase> eligible;
    for (const auto& u : unselected) {
        if (ce_of(u) < preferred_min_ce) eligible.push_back(u);
    }
    if (eligible.size() < k) return std::nullopt;
    std::sort(eligible.begin(), eligible.end(), [](const GuidancePhrase& a, const GuidancePhrase& b) {
        if (a.text != b.text) return a.text < b.text;
        return *a.ce_score < *b.ce_score;
    });
    SeededRng rng(input.seed);
    std::vector<GuidancePhrase> out;
    for (std::size_t i : rng.sample_indices(eligible.size(), k)) out.push_back(eligible[i]);
    return out;
}

RankOutcome rank_candidates(const RankInput& input, const SimilarityFn& sim) {
    validate_rank_input(input);
    RankOutcome outcome;
    outcome.pool = group_pool(input.matrix);

    auto preferred = mmr_select(input, outcome.pool, sim);
    if (!preferred) {
        outcome.skipped = true;
        outcome.skip_reason = kSkipPoolTooSmall;
        return outcome;
    }
    outcome.preferred = std::move(*preferred);

    std::set<std::string> chosen_keys;
    for (const auto& p : outcome.preferred) chosen_keys.insert(normalize_phrase(p.text));
    double min_ce = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < outcome.preferred.size(); ++i) min_ce = std::min(min_ce, ce_of(outcome.preferred[i]));

    // Every other matrix entry, one per normalized text, keeping the highest CE
    // so a duplicate cannot sneak under the threshold.
    std::map<std::string, GuidancePhrase> unselected;
    for (const auto& row : input.matrix.rows) {
        for (const auto& c : row) {
            auto key = normalize_phrase(c.text);
            if (key.empty() || chosen_keys.count(key)) continue;
            auto [it, inserted] = unselected.emplace(key, as_phrase(c));
            if (!inserted && *c.ce_score > *it->second.ce_score) it->second = as_phrase(c);
        }
    }
    std::vector<GuidancePhrase> candidates;
    for (auto& [key, phrase] : unselected) candidates.push_back(std::move(phrase));

    auto dispreferred = sample_dispreferred(input, candidates, min_ce);
    if (!dispreferred) {
        outcome.skipped = true;
        outcome.skip_reason = kSkipTooFewDispreferred;
        return outcome;
    }
    outcome.dispreferred = std::move(*dispreferred);
    return outcome;
}

ValidationReport check_outcome(const RankOutcome& outcome, std::size_t k) {
    ValidationReport report;
    if (outcome.skipped) {
        report.push_back({"outcome", "outcome was skipped: " + outcome.skip_reason});
        return report;
    }
    if (outcome.preferred.size() != k) report.push_back({"outcome.preferred", "expected " + std::to_string(k) + " phrases"});
    if (outcome.dispreferred.size() != k) {
        report.push_back({"outcome.dispreferred", "expected " + std::to_string(k) + " phrases"});
    }
    std::set<std::string> preferred_keys;
    for (const auto& p : outcome.preferred) preferred_keys.insert(normalize_phrase(p.text));
    for (const auto& d : outcome.dispreferred) {
        if (preferred_keys.count(normalize_phrase(d.text))) {
            report.push_back({"outcome.dispreferred", "phrase also preferred: " + d.text});
        }
    }
    double min_preferred = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < outcome.preferred.size(); ++i) {
        if (!outcome.preferred[i].ce_score) {
            report.push_back({"outcome.preferred", "preferred phrase lacks ce_score"});
            continue;
        }
        min_preferred = std::min(min_preferred, *outcome.preferred[i].ce_score);
    }
    for (const auto& d : outcome.dispreferred) {
        if (!d.ce_score) {
            report.push_back({"outcome.dispreferred", "dispreferred phrase lacks ce_score"});
        } else if (!(*d.ce_score < min_preferred)) {
            report.push_back({"outcome.dispreferred", "dispreferred CE not below preferred minimum"});
        }
    }
    return report;
}

PreferenceRecord build_k_pair(const std::string& query, const std::string& answer, const ContextBundle& context,
                              const RankOutcome& outcome, std::size_t k) {
    auto report = check_outcome(outcome, k);
    if (!report.empty()) throw ValidationError("cannot build k-pair record: " + report.front().message);
    std::vector<std::string> chosen, rejected;
    for (const auto& p : outcome.preferred) chosen.push_back(p.text);
    for (const auto& p : outcome.dispreferred) rejected.push_back(p.text);
    PreferenceRecord record{render_guidance_prompt(query, answer, context, k), join(chosen, "\n"), join(rejected, "\n"),
                            PairArity::k_pair};
    if (auto issues = validate_preference_record(record, k); !issues.empty()) {
        throw ValidationError("cannot build k-pair record: " + issues.front().message);
    }
    return record;
}

}  // namespace proguide
