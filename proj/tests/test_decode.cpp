#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <fstream>

#include "proguide/core/json_io.hpp"
#include "proguide/core/types.hpp"
#include "proguide/decode/dbs.hpp"
#include "proguide/decode/phrase_model.hpp"
#include "proguide/decode/token_scorer.hpp"
#include "support/naive_dbs.hpp"

using namespace proguide;

namespace {

const std::string kData = PROGUIDE_TEST_DATA;

const NgramTableScorer& trigram() {
    static const NgramTableScorer scorer = NgramTableScorer::load(kData + "/trigram.tsv");
    return scorer;
}

const NgramTableScorer& five_token() {
    static const NgramTableScorer scorer = NgramTableScorer::load(kData + "/bigram5.tsv");
    return scorer;
}

void expect_same_candidate(const ScoredCandidate& got, const json& want) {
    EXPECT_EQ(got.tokens, want.at("tokens").get<TokenSeq>());
    EXPECT_EQ(got.text, want.at("text").get<std::string>());
    EXPECT_EQ(got.lm_score, want.at("lm_score").get<double>());
    EXPECT_EQ(got.score, want.at("score").get<double>());
    EXPECT_EQ(got.penalty_total, want.at("penalty_total").get<double>());
    EXPECT_EQ(got.forced, want.at("forced").get<bool>());
}

int cross_group_shared(const CandidateMatrix& m, TokenId eos, int n) {
    int total = 0;
    for (int g = 0; g < m.num_groups; ++g) {
        for (int h = g + 1; h < m.num_groups; ++h) {
            for (const auto& a : m.rows[static_cast<std::size_t>(g)]) {
                for (const auto& b : m.rows[static_cast<std::size_t>(h)]) {
                    total += test_support::naive_shared(test_support::naive_content(a.tokens, eos),
                                                   test_support::naive_content(b.tokens, eos), n);
                }
            }
        }
    }
    return total;
}

}  // namespace

TEST(TokenScorer, FixtureRowsAreNormalized) {
    for (const TokenSeq& prefix : {TokenSeq{}, TokenSeq{1}, TokenSeq{2, 1}, TokenSeq{1, 1, 2, 2}}) {
        auto row = trigram().log_probs(prefix);
        EXPECT_LT(normalization_error(row), 1e-6);
        for (double lp : row) EXPECT_TRUE(std::isfinite(lp));
    }
}

TEST(TokenScorer, BacksOffToLongestStoredSuffix) {
    // "A B A": longest stored suffix is "B A"
    auto row = trigram().log_probs(TokenSeq{1, 2, 1});
    EXPECT_DOUBLE_EQ(row[1], std::log(0.5));
    // five-token fixture has no "c d" row, so "c d" backs off to "d"
    auto back = five_token().log_probs(TokenSeq{3, 4});
    EXPECT_DOUBLE_EQ(back[0], std::log(0.35));
}

TEST(TokenScorer, RejectsRowsThatDoNotSumToOne) {
    EXPECT_THROW(NgramTableScorer::parse("@vocab\t</s> A\n@eos\t</s>\n-\tA\t0.5\n-\t</s>\t0.4\n"), ParseError);
    EXPECT_THROW(NgramTableScorer::parse("@vocab\t</s> A\n@eos\t</s>\n-\tZ\t1\n"), ParseError);
    EXPECT_THROW(NgramTableScorer::parse("-\tA\t1\n"), ParseError);
}

TEST(TokenScorer, DetokenizeSkipsControlTokens) {
    EXPECT_EQ(trigram().detokenize(TokenSeq{1, 2, 0}), "A B");
    auto model = PhraseModelScorer::from_phrases({"buy stocks now"});
    EXPECT_EQ(model.detokenize(model.encode_prompt("buy")), "buy");
}

TEST(PhraseModel, RowsAreNormalizedAndNeverEmitSeparator) {
    auto model = PhraseModelScorer::from_phrases({"how to buy stocks", "what stocks pay dividends", "how to save"});
    auto prompt = model.encode_prompt("dividends and stocks");
    for (std::size_t len = 0; len < 4; ++len) {
        TokenSeq prefix = prompt;
        for (std::size_t i = 0; i < len; ++i) prefix.push_back(static_cast<TokenId>(2 + i));
        auto row = model.log_probs(prefix);
        EXPECT_LT(normalization_error(row), 1e-9);
        EXPECT_EQ(row[static_cast<std::size_t>(model.separator())], kLogZero);
    }
}

TEST(PhraseModel, PromptWordsAreBoosted) {
    auto model = PhraseModelScorer::from_phrases({"how to buy stocks", "how to save money"});
    auto plain = model.log_probs(model.encode_prompt(""));
    auto boosted = model.log_probs(model.encode_prompt("money"));
    auto money = static_cast<std::size_t>(model.vocabulary().id("money"));
    EXPECT_GT(boosted[money], plain[money]);
    EXPECT_THROW(model.log_probs(TokenSeq{999}), std::out_of_range);
}

TEST(NgramPenalty, CountsDistinctSharedNgrams) {
    EXPECT_EQ(ngram_penalty(TokenSeq{1, 2, 3}, TokenSeq{1, 2, 4}, 1), -2.0);
    EXPECT_EQ(ngram_penalty(TokenSeq{1, 2, 3}, TokenSeq{1, 2, 3}, 1), -3.0);
    EXPECT_EQ(ngram_penalty(TokenSeq{1, 2}, TokenSeq{3, 4}, 2), 0.0);
    EXPECT_EQ(ngram_penalty(TokenSeq{1, 2, 3}, TokenSeq{1, 2, 4}, 2), -3.0);
    // repeated tokens count once
    EXPECT_EQ(ngram_penalty(TokenSeq{1, 1, 1}, TokenSeq{1}, 1), -1.0);
    EXPECT_THROW(ngram_penalty(TokenSeq{1}, TokenSeq{1}, 0), ValidationError);
}

TEST(NgramPenalty, IsSymmetric) {
    TokenSeq a{1, 2, 3, 1, 2}, b{2, 3, 3, 1};
    for (int n = 1; n <= 3; ++n) EXPECT_EQ(ngram_penalty(a, b, n), ngram_penalty(b, a, n));
}

TEST(Dissimilarity, SumsOverGroup) {
    // a=1 b=2 c=3
    EXPECT_EQ(dissimilarity(TokenSeq{1, 2}, {TokenSeq{1, 3}, TokenSeq{2, 3}}, 1), -2.0);
    EXPECT_EQ(dissimilarity(TokenSeq{}, {TokenSeq{1, 3}}, 2), 0.0);
    EXPECT_EQ(dissimilarity(TokenSeq{1, 5}, {TokenSeq{1, 3}, TokenSeq{5, 6}}, 1), -2.0);
    EXPECT_THROW(dissimilarity(TokenSeq{1}, {}, 1), ValidationError);
}

TEST(BeamSearch, MatchesFrozenReference) {
    auto ref = read_json_file(kData + "/dbs_reference.json");
    for (auto& [width, rows] : ref.at("beam_search").items()) {
        auto got = beam_search(trigram(), TokenSeq{}, std::stoi(width), ref.at("max_length").get<int>());
        ASSERT_EQ(got.size(), rows.size()) << "width " << width;
        for (std::size_t i = 0; i < got.size(); ++i) expect_same_candidate(got[i], rows[i]);
    }
}

TEST(Dbs, MatchesFrozenReference) {
    auto ref = read_json_file(kData + "/dbs_reference.json");
    for (const auto& run : ref.at("dbs")) {
        DbsConfig config;
        config.num_groups = run.at("groups").get<int>();
        config.beams_per_group = run.at("beams_per_group").get<int>();
        config.diversity_weight = run.at("diversity_weight").get<double>();
        config.ngram_order = run.at("ngram_order").get<int>();
        config.max_length = ref.at("max_length").get<int>();
        auto got = dbs_decode(trigram(), TokenSeq{}, config);
        const auto& rows = run.at("rows");
        ASSERT_EQ(got.rows.size(), rows.size());
        for (std::size_t g = 0; g < rows.size(); ++g) {
            ASSERT_EQ(got.rows[g].size(), rows[g].size());
            for (std::size_t i = 0; i < rows[g].size(); ++i) expect_same_candidate(got.rows[g][i], rows[g][i]);
        }
    }
}

TEST(Dbs, SingleGroupEqualsBeamSearch) {
    for (int width : {1, 2, 3, 4}) {
        for (double weight : {0.0, 0.5, 3.0}) {
            DbsConfig config{1, width, weight, 2, 4};
            auto m = dbs_decode(trigram(), TokenSeq{}, config);
            EXPECT_EQ(m.rows.front(), beam_search(trigram(), TokenSeq{}, width, 4));
        }
    }
}

TEST(Dbs, ZeroWeightGivesIdenticalRows) {
    DbsConfig config{4, 3, 0.0, 2, 4};
    auto m = dbs_decode(five_token(), TokenSeq{}, config);
    for (const auto& row : m.rows) EXPECT_EQ(row, m.rows.front());
    EXPECT_EQ(m.rows.front(), beam_search(five_token(), TokenSeq{}, 3, 4));
}

TEST(Dbs, FirstGroupIgnoresWeight) {
    auto base = dbs_decode(five_token(), TokenSeq{}, DbsConfig{3, 2, 0.0, 2, 4});
    for (double weight : {0.25, 1.0, 10.0}) {
        auto m = dbs_decode(five_token(), TokenSeq{}, DbsConfig{3, 2, weight, 2, 4});
        EXPECT_EQ(m.rows.front(), base.rows.front());
    }
}

TEST(Dbs, OptimizedMatchesNaiveOverGrid) {
    UniformScorer uniform(4);
    const std::vector<const TokenScorer*> scorers{&trigram(), &five_token(), &uniform};
    for (const auto* scorer : scorers) {
        for (int groups : {1, 2, 4, 8}) {
            for (int width : {1, 2, 4}) {
                for (double weight : {0.0, 0.5, 1.0}) {
                    for (int n : {1, 2}) {
                        for (int max_length : {1, 3, 4}) {
                            DbsConfig config{groups, width, weight, n, max_length};
                            auto fast = dbs_decode(*scorer, TokenSeq{}, config);
                            auto slow = test_support::naive_dbs_decode(*scorer, TokenSeq{}, config);
                            ASSERT_EQ(fast, slow) << "G=" << groups << " B'=" << width << " w=" << weight
                                                  << " n=" << n << " L=" << max_length;
                        }
                    }
                }
            }
        }
    }
}

TEST(Dbs, PromptConditionsTheDecode) {
    DbsConfig config{2, 2, 0.5, 2, 4};
    auto fast = dbs_decode(five_token(), TokenSeq{1, 2}, config);
    EXPECT_EQ(fast, test_support::naive_dbs_decode(five_token(), TokenSeq{1, 2}, config));
    EXPECT_NE(fast, dbs_decode(five_token(), TokenSeq{}, config));
    EXPECT_THROW(dbs_decode(five_token(), TokenSeq{9}, config), ValidationError);
}

TEST(Dbs, ShapeAndLmScoresAreConsistent) {
    DbsConfig config{4, 4, 0.5, 2, 4};
    auto m = dbs_decode(five_token(), TokenSeq{}, config);
    ASSERT_EQ(m.rows.size(), 4u);
    for (const auto& row : m.rows) {
        ASSERT_EQ(row.size(), 4u);
        for (std::size_t i = 0; i + 1 < row.size(); ++i) EXPECT_GE(row[i].score, row[i + 1].score);
        for (const auto& c : row) {
            EXPECT_LE(c.lm_score, 0.0);
            double recomputed = 0.0;
            for (std::size_t t = 0; t < c.tokens.size(); ++t) {
                auto lp = five_token().log_probs(std::span<const TokenId>(c.tokens.data(), t));
                recomputed += lp[static_cast<std::size_t>(c.tokens[t])];
            }
            EXPECT_NEAR(c.lm_score, recomputed, 1e-9);
            EXPECT_EQ(c.forced, c.tokens.back() != five_token().eos());
        }
    }
}

TEST(Dbs, ForceTerminatesAtMaxLength) {
    // All tokens tie under the uniform scorer; EOS has the smallest id so it
    // finishes first, the other beams hit max_length 1 and are forced.
    UniformScorer uniform(4);
    auto m = dbs_decode(uniform, TokenSeq{}, DbsConfig{1, 3, 0.0, 1, 1});
    EXPECT_TRUE(m.any_forced());
    EXPECT_FALSE(m.at(0, 0).forced);  // EOS is the smallest id and wins the first tie
}

TEST(Dbs, IsDeterministic) {
    DbsConfig config{4, 4, 0.5, 2, 6};
    EXPECT_EQ(dbs_decode(five_token(), TokenSeq{}, config), dbs_decode(five_token(), TokenSeq{}, config));
}

TEST(Dbs, PenalizedDecodeNeverSharesMoreThanUnpenalized) {
    for (const auto* scorer : {&trigram(), &five_token()}) {
        for (int groups : {2, 3, 4, 8}) {
            for (int width : {1, 2, 4}) {
                for (int n : {1, 2}) {
                    for (int max_length : {2, 3, 4}) {
                        auto base = dbs_decode(*scorer, TokenSeq{}, DbsConfig{groups, width, 0.0, n, max_length});
                        const int unpenalized = cross_group_shared(base, scorer->eos(), n);
                        for (double weight : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
                            auto m = dbs_decode(*scorer, TokenSeq{}, DbsConfig{groups, width, weight, n, max_length});
                            EXPECT_LE(cross_group_shared(m, scorer->eos(), n), unpenalized)
                                << "G=" << groups << " B'=" << width << " n=" << n << " L=" << max_length
                                << " w=" << weight;
                        }
                    }
                }
            }
        }
    }
}

// Greedy group-sequential decoding is not monotone in the weight: a moderate
// penalty can steer group 1 onto a path whose finished candidates overlap
// group 0 more than those picked under a smaller penalty. The independent
// Python reference reproduces the same counts.
TEST(Dbs, SharedCountIsNotMonotoneInWeight) {
    std::vector<int> counts;
    for (double weight : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0}) {
        auto m = dbs_decode(trigram(), TokenSeq{}, DbsConfig{2, 2, weight, 2, 4});
        counts.push_back(cross_group_shared(m, trigram().eos(), 2));
    }
    EXPECT_EQ(counts, (std::vector<int>{6, 3, 4, 3, 1, 1}));
}

TEST(Dbs, RejectsInvalidConfig) {
    EXPECT_THROW(dbs_decode(trigram(), TokenSeq{}, DbsConfig{0, 1, 0.5, 1, 4}), ValidationError);
    EXPECT_THROW(dbs_decode(trigram(), TokenSeq{}, DbsConfig{1, 0, 0.5, 1, 4}), ValidationError);
    EXPECT_THROW(dbs_decode(trigram(), TokenSeq{}, DbsConfig{1, 1, -0.5, 1, 4}), ValidationError);
    EXPECT_THROW(dbs_decode(trigram(), TokenSeq{}, DbsConfig{1, 1, 0.5, 0, 4}), ValidationError);
    EXPECT_THROW(dbs_decode(trigram(), TokenSeq{}, DbsConfig{1, 1, 0.5, 1, 0}), ValidationError);
}

TEST(Dbs, MatrixJsonRoundTrips) {
    auto m = dbs_decode(five_token(), TokenSeq{}, DbsConfig{2, 2, 0.5, 2, 4});
    m.at(1, 0).ce_score = 0.25;
    EXPECT_EQ(json(m).get<CandidateMatrix>(), m);
    json bad = m;
    bad["rows"].erase(0);
    EXPECT_THROW(bad.get<CandidateMatrix>(), ParseError);
}

TEST(Dbs, DefaultConfigOnPhraseModelIsFast) {
    std::vector<std::string> corpus;
    for (const char* w : {"stocks", "bonds", "funds", "taxes", "loans", "rates", "savings", "budget"}) {
        corpus.push_back(std::string("how do ") + w + " work");
        corpus.push_back(std::string("best ") + w + " for beginners");
        corpus.push_back(std::string("compare ") + w + " and savings");
    }
    auto model = PhraseModelScorer::from_phrases(corpus);
    auto start = std::chrono::steady_clock::now();
    auto m = dbs_decode(model, model.encode_prompt("how do bonds work"), DbsConfig{});
    auto elapsed = std::chrono::steady_clock::now() - start;
    EXPECT_EQ(m.rows.size(), 4u);
    EXPECT_LT(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count(), 1000);
}
