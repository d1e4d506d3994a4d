#include "proguide/decode/dbs.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "proguide/core/types.hpp"

namespace proguide {

namespace {

using NgramSet = std::set<TokenSeq>;

NgramSet collect_ngrams(std::span<const TokenId> tokens, int n) {
    NgramSet out;
    for (int order = 1; order <= n; ++order) {
        const auto m = static_cast<std::size_t>(order);
        for (std::size_t i = 0; i + m <= tokens.size(); ++i) out.emplace(tokens.begin() + i, tokens.begin() + i + m);
    }
    return out;
}

std::size_t shared_count(const NgramSet& a, const NgramSet& b) {
    const NgramSet& small = a.size() <= b.size() ? a : b;
    const NgramSet& large = a.size() <= b.size() ? b : a;
    std::size_t count = 0;
    for (const auto& g : small) count += large.count(g);
    return count;
}

// N-grams of a sequence chosen earlier in the current step, arranged so the
// n-grams an extension adds can be matched by context lookup.
struct ChosenIndex {
    NgramSet grams;
    // next[m - 1][context of m - 1 tokens] = tokens completing an order-m n-gram
    std::vector<std::map<TokenSeq, std::vector<TokenId>>> next;

    ChosenIndex(std::span<const TokenId> content, int n) : grams(collect_ngrams(content, n)), next(n) {
        for (const auto& g : grams) {
            TokenSeq context(g.begin(), g.end() - 1);
            next[g.size() - 1][context].push_back(g.back());
        }
    }
};

struct Beam {
    TokenSeq tokens;
    TokenSeq content;  // tokens without end-of-sequence
    NgramSet grams;    // n-grams of content
    double lm = 0.0;
    double penalty = 0.0;
    double score = 0.0;
};

struct Extension {
    std::size_t beam;
    std::size_t parent_rank;
    TokenId token;
    double lm;
    double score;
    double penalty;
};

ScoredCandidate to_candidate(const TokenScorer& scorer, TokenSeq tokens, double lm, double score, double penalty,
                             bool forced) {
    ScoredCandidate c;
    c.text = scorer.detokenize(tokens);
    c.tokens = std::move(tokens);
    c.lm_score = lm;
    c.score = score;
    c.penalty_total = penalty;
    c.forced = forced;
    return c;
}

bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
}

std::vector<ScoredCandidate> finalize_row(std::vector<ScoredCandidate> finished, int width) {
    std::sort(finished.begin(), finished.end(), ranks_before);
    const auto w = static_cast<std::size_t>(width);
    if (finished.size() > w) finished.resize(w);
    while (!finished.empty() && finished.size() < w) {
        ScoredCandidate pad = finished.back();
        pad.padded = true;
        finished.push_back(std::move(pad));
    }
    return finished;
}

TokenSeq with_prefix(std::span<const TokenId> prompt, const TokenSeq& tokens) {
    TokenSeq prefix(prompt.begin(), prompt.end());
    prefix.insert(prefix.end(), tokens.begin(), tokens.end());
    return prefix;
}

void check_prompt(const TokenScorer& scorer, std::span<const TokenId> prompt) {
    for (TokenId t : prompt) {
        if (!scorer.vocabulary().contains(t)) throw ValidationError("prompt token outside the scorer vocabulary");
    }
}

}  // namespace

void DbsConfig::validate() const {
    if (num_groups < 1) throw ValidationError("num_groups must be >= 1");
    if (beams_per_group < 1) throw ValidationError("beams_per_group must be >= 1");
    if (!(diversity_weight >= 0.0)) throw ValidationError("diversity_weight must be >= 0");
    if (ngram_order < 1) throw ValidationError("ngram_order must be >= 1");
    if (max_length < 1) throw ValidationError("max_length must be >= 1");
}

bool CandidateMatrix::any_forced() const {
    for (const auto& row : rows) {
        for (const auto& c : row) {
            if (c.forced) return true;
        }
    }
    return false;
}

double ngram_penalty(std::span<const TokenId> a, std::span<const TokenId> b, int n) {
    if (n < 1) throw ValidationError("n-gram order must be >= 1");
    return -static_cast<double>(shared_count(collect_ngrams(a, n), collect_ngrams(b, n)));
}

double dissimilarity(std::span<const TokenId> candidate, const std::vector<TokenSeq>& group, int n) {
    if (group.empty()) throw ValidationError("dissimilarity needs a non-empty group");
    double total = 0.0;
    for (const auto& member : group) total += ngram_penalty(candidate, member, n);
    return total;
}

CandidateMatrix dbs_decode(const TokenScorer& scorer, std::span<const TokenId> prompt, const DbsConfig& config) {
    config.validate();
    check_prompt(scorer, prompt);

    const auto groups = static_cast<std::size_t>(config.num_groups);
    const auto width = static_cast<std::size_t>(config.beams_per_group);
    const std::size_t vocab = scorer.vocab_size();
    const TokenId eos = scorer.eos();
    const int n = config.ngram_order;
    const double weight = config.diversity_weight;

    std::vector<std::vector<Beam>> live(groups, std::vector<Beam>(1));
    std::vector<std::vector<ScoredCandidate>> finished(groups);

    for (int step = 0; step < config.max_length; ++step) {
        std::vector<ChosenIndex> chosen;
        for (std::size_t g = 0; g < groups; ++g) {
            auto& beams = live[g];
            if (beams.empty()) continue;

            // All live beams share a length, so ordering parents and then
            // tokens is lexicographic order of the extensions.
            std::vector<std::size_t> order(beams.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return beams[a].tokens < beams[b].tokens; });
            std::vector<std::size_t> parent_rank(beams.size());
            for (std::size_t r = 0; r < order.size(); ++r) parent_rank[order[r]] = r;

            std::vector<Extension> extensions;
            extensions.reserve(beams.size() * vocab);
            std::vector<int> shared(vocab);
            for (std::size_t b = 0; b < beams.size(); ++b) {
                const Beam& beam = beams[b];
                const auto log_probs = scorer.log_probs(with_prefix(prompt, beam.tokens));

                int base = 0;
                for (const auto& c : chosen) base += static_cast<int>(shared_count(beam.grams, c.grams));
                std::fill(shared.begin(), shared.end(), base);
                for (const auto& c : chosen) {
                    for (int m = 1; m <= n; ++m) {
                        const auto ctx_len = static_cast<std::size_t>(m - 1);
                        if (beam.content.size() < ctx_len) break;
                        TokenSeq context(beam.content.end() - static_cast<std::ptrdiff_t>(ctx_len), beam.content.end());
                        auto it = c.next[static_cast<std::size_t>(m - 1)].find(context);
                        if (it == c.next[static_cast<std::size_t>(m - 1)].end()) continue;
                        for (TokenId v : it->second) {
                            if (v == eos) continue;
                            TokenSeq gram = context;
                            gram.push_back(v);
                            if (!beam.grams.count(gram)) ++shared[static_cast<std::size_t>(v)];
                        }
                    }
                }

                for (std::size_t v = 0; v < vocab; ++v) {
                    const double delta = -static_cast<double>(shared[v]);
                    const double lm = beam.lm + log_probs[v];
                    extensions.push_back({b, parent_rank[b], static_cast<TokenId>(v), lm, lm + weight * delta,
                                          beam.penalty + weight * delta});
                }
            }

            auto better = [](const Extension& a, const Extension& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.parent_rank != b.parent_rank) return a.parent_rank < b.parent_rank;
                return a.token < b.token;
            };
            // At most one end-of-sequence extension per beam, so 2 * width
            // sorted entries always contain width live ones when they exist.
            const std::size_t head = std::min(extensions.size(), 2 * width + 1);
            std::partial_sort(extensions.begin(), extensions.begin() + static_cast<std::ptrdiff_t>(head),
                              extensions.end(), better);

            std::vector<Beam> next;
            for (std::size_t i = 0; i < head && next.size() < width; ++i) {
                const Extension& e = extensions[i];
                const Beam& parent = beams[e.beam];
                TokenSeq tokens = parent.tokens;
                tokens.push_back(e.token);
                if (e.token == eos) {
                    chosen.emplace_back(parent.content, n);
                    finished[g].push_back(to_candidate(scorer, std::move(tokens), e.lm, e.score, e.penalty, false));
                    continue;
                }
                Beam child;
                child.tokens = std::move(tokens);
                child.content = parent.content;
                child.content.push_back(e.token);
                child.grams = parent.grams;
                for (int m = 1; m <= n && static_cast<std::size_t>(m) <= child.content.size(); ++m) {
                    child.grams.emplace(child.content.end() - m, child.content.end());
                }
                child.lm = e.lm;
                child.penalty = e.penalty;
                child.score = e.score;
                chosen.emplace_back(child.content, n);
                next.push_back(std::move(child));
            }
            beams = std::move(next);
        }
    }

    CandidateMatrix matrix;
    matrix.num_groups = config.num_groups;
    matrix.beams_per_group = config.beams_per_group;
    for (std::size_t g = 0; g < groups; ++g) {
        for (auto& beam : live[g]) {
            finished[g].push_back(to_candidate(scorer, std::move(beam.tokens), beam.lm, beam.score, beam.penalty, true));
        }
        matrix.rows.push_back(finalize_row(std::move(finished[g]), config.beams_per_group));
    }
    return matrix;
}

std::vector<ScoredCandidate> beam_search(const TokenScorer& scorer, std::span<const TokenId> prompt, int beam_width,
                                         int max_length) {
    if (beam_width < 1) throw ValidationError("beam_width must be >= 1");
    if (max_length < 1) throw ValidationError("max_length must be >= 1");
    check_prompt(scorer, prompt);

    struct Hyp {
        TokenSeq tokens;
        double lm;
    };
    std::vector<Hyp> live{{{}, 0.0}};
    std::vector<ScoredCandidate> finished;
    for (int step = 0; step < max_length && !live.empty(); ++step) {
        std::vector<Hyp> candidates;
        for (const auto& h : live) {
            const auto lp = scorer.log_probs(with_prefix(prompt, h.tokens));
            for (std::size_t v = 0; v < lp.size(); ++v) {
                TokenSeq t = h.tokens;
                t.push_back(static_cast<TokenId>(v));
                candidates.push_back({std::move(t), h.lm + lp[v]});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Hyp& a, const Hyp& b) {
            if (a.lm != b.lm) return a.lm > b.lm;
            return a.tokens < b.tokens;
        });
        std::vector<Hyp> next;
        for (auto& c : candidates) {
            if (next.size() == static_cast<std::size_t>(beam_width)) break;
            if (c.tokens.back() == scorer.eos()) {
                finished.push_back(to_candidate(scorer, std::move(c.tokens), c.lm, c.lm, 0.0, false));
            } else {
                next.push_back(std::move(c));
            }
        }
        live = std::move(next);
    }
    for (auto& h : live) finished.push_back(to_candidate(scorer, std::move(h.tokens), h.lm, h.lm, 0.0, true));
    return finalize_row(std::move(finished), beam_width);
}

void to_json(nlohmann::json& j, const ScoredCandidate& candidate) {
    j = nlohmann::json{{"tokens", candidate.tokens},
                       {"text", candidate.text},
                       {"lm_score", candidate.lm_score},
                       {"score", candidate.score},
                       {"penalty_total", candidate.penalty_total},
                       {"forced", candidate.forced},
                       {"padded", candidate.padded},
                       {"ce_score", candidate.ce_score ? nlohmann::json(*candidate.ce_score) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, ScoredCandidate& candidate) {
    candidate.tokens = j.at("tokens").get<TokenSeq>();
    candidate.text = j.at("text").get<std::string>();
    candidate.lm_score = j.at("lm_score").get<double>();
    candidate.score = j.at("score").get<double>();
    candidate.penalty_total = j.at("penalty_total").get<double>();
    candidate.forced = j.at("forced").get<bool>();
    candidate.padded = j.value("padded", false);
    candidate.ce_score.reset();
    if (j.contains("ce_score") && !j.at("ce_score").is_null()) candidate.ce_score = j.at("ce_score").get<double>();
}

void to_json(nlohmann::json& j, const CandidateMatrix& matrix) {
    j = nlohmann::json{{"num_groups", matrix.num_groups},
                       {"beams_per_group", matrix.beams_per_group},
                       {"rows", matrix.rows}};
}

void from_json(const nlohmann::json& j, CandidateMatrix& matrix) {
    matrix.num_groups = j.at("num_groups").get<int>();
    matrix.beams_per_group = j.at("beams_per_group").get<int>();
    matrix.rows = j.at("rows").get<std::vector<std::vector<ScoredCandidate>>>();
    if (matrix.rows.size() != static_cast<std::size_t>(matrix.num_groups)) {
        throw ParseError("candidate matrix row count does not match num_groups");
    }
    for (const auto& row : matrix.rows) {
        if (row.size() != static_cast<std::size_t>(matrix.beams_per_group)) {
            throw ParseError("candidate matrix row width does not match beams_per_group");
        }
    }
}

}  // namespace proguide
