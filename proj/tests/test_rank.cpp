#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "proguide/core/json_io.hpp"
#include "proguide/core/random.hpp"
#include "proguide/core/text.hpp"
#include "proguide/rank/click_estimator.hpp"
#include "proguide/rank/preference_ranker.hpp"
#include "support/mmr_oracle.hpp"
#include "support/synthetic.hpp"

using namespace proguide;

namespace {

GuidancePhrase phrase(std::string text, double ce) { return {std::move(text), ce, PhraseOrigin::decoded}; }

ScoredCandidate cell(std::string text, double ce) {
    ScoredCandidate c;
    c.text = std::move(text);
    c.ce_score = ce;
    return c;
}

CandidateMatrix matrix_of(const std::vector<std::vector<std::pair<std::string, double>>>& rows) {
    CandidateMatrix m;
    m.num_groups = static_cast<int>(rows.size());
    m.beams_per_group = static_cast<int>(rows.front().size());
    for (const auto& row : rows) {
        std::vector<ScoredCandidate> r;
        for (const auto& [text, ce] : row) r.push_back(cell(text, ce));
        m.rows.push_back(r);
    }
    return m;
}

using test_support::texts;

}  // namespace

TEST(Featurize, EmptyInputsGiveEmptyVector) { EXPECT_TRUE(featurize("", "").empty()); }

TEST(Featurize, IsDeterministicAndInRange) {
    auto a = featurize("how do stocks work", "best stocks");
    EXPECT_EQ(a, featurize("how do stocks work", "best stocks"));
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        EXPECT_LT(a.entries[i].first, kHashDim);
        if (i > 0) EXPECT_LT(a.entries[i - 1].first, a.entries[i].first);
    }
}

TEST(Featurize, MatchesExplicitEnumerationForAbc) {
    // "abc" has n-grams ab, bc, abc in each of q, g and x; Jaccard is 1.
    std::map<std::uint32_t, double> expected;
    const double unit = 1.0 / std::sqrt(3.0);
    for (const char* ns : {"q", "g", "x"}) {
        for (const char* gram : {"ab", "bc", "abc"}) expected[feature_index(ns, gram)] += unit;
    }
    expected[feature_index("x", "\x01jaccard")] += 1.0;
    auto got = featurize("abc", "abc");
    ASSERT_EQ(got.entries.size(), expected.size());
    for (const auto& [i, v] : got.entries) EXPECT_NEAR(v, expected.at(i), 1e-15);
    EXPECT_FALSE(featurize("abc", "xyz").empty());
    for (const auto& [i, v] : featurize("abc", "xyz").entries) EXPECT_NE(i, feature_index("x", "\x01jaccard"));
}

TEST(Featurize, NamespacesMakeItAsymmetric) {
    EXPECT_NE(featurize("stocks", "bonds"), featurize("bonds", "stocks"));
    EXPECT_EQ(featurize("same", "same"), featurize("same", "same"));
    EXPECT_EQ(char_ngrams("AbA"), (std::vector<std::string>{"ab", "aba", "ba"}));
}

TEST(Bce, KnownValues) {
    EXPECT_NEAR(bce_loss(std::vector<int>{1}, std::vector<double>{0.5}), 0.693147, 1e-6);
    EXPECT_NEAR(bce_loss(std::vector<int>{1, 0}, std::vector<double>{0.9, 0.1}), 0.105361, 1e-6);
    EXPECT_NEAR(bce_loss(std::vector<int>{1}, std::vector<double>{1.0 - 1e-12}), 0.0, 1e-11);
    EXPECT_TRUE(std::isfinite(bce_loss(std::vector<int>{1}, std::vector<double>{0.0})));
    EXPECT_THROW(bce_loss(std::vector<int>{1, 0}, std::vector<double>{0.5}), ValidationError);
    EXPECT_THROW(bce_loss(std::vector<int>{}, std::vector<double>{}), ValidationError);
    EXPECT_THROW(bce_loss(std::vector<int>{2}, std::vector<double>{0.5}), ValidationError);
}

TEST(Bce, ApproachesZeroForConfidentCorrectPredictions) {
    double previous = 1.0;
    for (double eps : {1e-1, 1e-3, 1e-6, 1e-9}) {
        double l = bce_loss(std::vector<int>{1, 0}, std::vector<double>{1.0 - eps, eps});
        EXPECT_LT(l, previous);
        previous = l;
    }
    EXPECT_LT(previous, 1e-8);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
    SeededRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto data = test_support::keyword_dataset(6, 100 + static_cast<std::uint64_t>(trial));
        CeModel model;
        model.bias = rng.unit() - 0.5;
        std::set<std::uint32_t> active;
        for (const auto& e : data) {
            for (const auto& [i, v] : featurize(e.query, e.guidance).entries) active.insert(i);
        }
        for (auto i : active) model.weights[i] = rng.unit() * 2.0 - 1.0;

        auto loss = [&](const CeModel& m) {
            std::vector<int> labels;
            std::vector<double> preds;
            for (const auto& e : data) {
                labels.push_back(e.label);
                preds.push_back(predict_ce(m, e.query, e.guidance));
            }
            return bce_loss(labels, preds);
        };
        auto grad = bce_gradient(model, data);
        const double h = 1e-6;
        auto check = [&](double analytic, double& param) {
            const double saved = param;
            param = saved + h;
            const double up = loss(model);
            param = saved - h;
            const double down = loss(model);
            param = saved;
            const double numeric = (up - down) / (2 * h);
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            EXPECT_LE(std::abs(analytic - numeric) / denom, 1e-5) << analytic << " vs " << numeric;
        };
        check(grad.bias, model.bias);
        for (std::size_t t = 0; t < grad.weights.size(); t += 7) {
            check(grad.weights[t].second, model.weights[grad.weights[t].first]);
        }
    }
}

TEST(Predict, LogisticEdges) {
    CeModel zero;
    EXPECT_EQ(predict_ce(zero, "anything", "at all"), 0.5);
    CeModel saturated;
    saturated.bias = 30.0;
    EXPECT_GE(predict_ce(saturated, "q", "g"), 0.999999);
    EXPECT_LT(predict_ce(saturated, "q", "g"), 1.0);
    saturated.bias = -800.0;
    EXPECT_GT(predict_ce(saturated, "q", "g"), 0.0);
}

TEST(TrainCe, SeparableKeywordDataset) {
    auto data = test_support::keyword_dataset(2000, 42);
    auto start = std::chrono::steady_clock::now();
    auto model = train_ce(data, CeHyperparams{0.1, 5, 7, 0.2});
    auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ASSERT_TRUE(model.validation_auc.has_value());
    EXPECT_GE(*model.validation_auc, 0.95);
    ASSERT_EQ(model.train_losses.size(), 6u);
    for (std::size_t i = 1; i < model.train_losses.size(); ++i) EXPECT_LT(model.train_losses[i], model.train_losses[i - 1]);
    EXPECT_EQ(model.train_size, 1600u);
    EXPECT_EQ(model.validation_size, 400u);
    EXPECT_LT(seconds, 30.0);

    // held-out positive
    EXPECT_GT(predict_ce(model, "cheap orchid tips", "why orchid guide"), 0.5);
}

TEST(TrainCe, OneEpochLowersLossAndZeroEpochsDoNot) {
    auto data = test_support::keyword_dataset(300, 5);
    auto none = train_ce(data, CeHyperparams{0.1, 0, 3, 0.2});
    auto one = train_ce(data, CeHyperparams{0.1, 1, 3, 0.2});
    ASSERT_EQ(none.train_losses.size(), 1u);
    EXPECT_NEAR(none.train_losses[0], std::log(2.0), 1e-12);
    EXPECT_LT(one.train_losses.back(), none.train_losses.back());
}

TEST(TrainCe, ShuffledInputGivesIdenticalWeights) {
    auto data = test_support::keyword_dataset(200, 9);
    auto shuffled = data;
    SeededRng rng(1234);
    rng.shuffle(shuffled);
    auto a = train_ce(data, CeHyperparams{0.1, 3, 77, 0.2});
    auto b = train_ce(shuffled, CeHyperparams{0.1, 3, 77, 0.2});
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.bias, b.bias);
    EXPECT_EQ(a.train_losses, b.train_losses);
}

TEST(TrainCe, RejectsSingleClassData) {
    std::vector<CeExample> data{{"a", "b", 1}, {"c", "d", 1}};
    try {
        train_ce(data);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("both clicked and unclicked"), std::string::npos);
    }
    EXPECT_THROW(train_ce({}), ValidationError);
}

TEST(TrainCe, ModelSaveLoadRoundTrips) {
    auto model = train_ce(test_support::keyword_dataset(200, 3), CeHyperparams{0.1, 2, 1, 0.2});
    auto path = std::filesystem::temp_directory_path() / "proguide_test_rank" / "ce.json";
    save_model(model, path);
    auto loaded = load_model(path);
    EXPECT_EQ(loaded.weights, model.weights);
    EXPECT_EQ(loaded.bias, model.bias);
    EXPECT_EQ(loaded.train_losses, model.train_losses);
    EXPECT_EQ(predict_ce(loaded, "q stocks", "stocks"), predict_ce(model, "q stocks", "stocks"));
}

TEST(Auc, MannWhitneyWithTies) {
    EXPECT_EQ(roc_auc(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 1.0);
    EXPECT_EQ(roc_auc(std::vector<int>{1, 0}, std::vector<double>{0.5, 0.5}), 0.5);
    EXPECT_EQ(roc_auc(std::vector<int>{0, 1, 0, 1}, std::vector<double>{0.1, 0.2, 0.3, 0.4}), 0.75);
    EXPECT_THROW(roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), ValidationError);
}

TEST(Similarity, KnownValues) {
    EXPECT_DOUBLE_EQ(similarity("buy stocks now", "buy stocks now"), 1.0);
    EXPECT_EQ(similarity("buy stocks", "sell bonds"), 0.0);
    EXPECT_NEAR(similarity("a b", "a c"), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(similarity("", ""), 0.0);
    EXPECT_EQ(similarity("x", ""), 0.0);
    EXPECT_EQ(similarity("Stocks, now!", "stocks now"), similarity("stocks now", "Stocks, now!"));
}

TEST(GroupPool, DegenerateAndHandTracedShapes) {
    auto one = group_pool(matrix_of({{{"only", 0.3}}}));
    EXPECT_EQ(texts(one), (std::vector<std::string>{"only"}));

    auto pool = group_pool(matrix_of({{{"g0r0", 0.9}, {"g0r1", 0.2}}, {{"g1r0", 0.5}, {"g1r1", 0.7}}}));
    ASSERT_EQ(pool.size(), 2u);
    EXPECT_EQ(pool[0].text, "g0r0");
    EXPECT_EQ(*pool[0].ce_score, 0.9);
    EXPECT_EQ(pool[1].text, "g1r1");
    EXPECT_EQ(*pool[1].ce_score, 0.7);

    auto same = group_pool(matrix_of({{{"dup", 0.1}, {"dup", 0.4}}, {{"dup", 0.3}, {"DUP ", 0.2}}}));
    ASSERT_EQ(same.size(), 1u);
    EXPECT_EQ(*same[0].ce_score, 0.4);

    EXPECT_THROW(group_pool(CandidateMatrix{}), ValidationError);
    auto missing = matrix_of({{{"a", 0.1}}});
    missing.rows[0][0].ce_score.reset();
    EXPECT_THROW(group_pool(missing), ValidationError);
}

TEST(Mmr, KEqualsOneTakesOnlyTheClick) {
    RankInput input;
    input.clicked = phrase("clicked", 0.1);
    input.k = 1;
    auto out = mmr_select(input, {});
    ASSERT_TRUE(out);
    EXPECT_EQ(texts(*out), (std::vector<std::string>{"clicked"}));
}

TEST(Mmr, LambdaOneIsCeRanking) {
    RankInput input;
    input.clicked = phrase("clicked thing", 0.0);
    input.k = 3;
    input.lambda = 1.0;
    std::vector<GuidancePhrase> pool{phrase("p", 0.2), phrase("q", 0.9), phrase("r", 0.5), phrase("s", 0.7)};
    EXPECT_EQ(texts(*mmr_select(input, pool)), (std::vector<std::string>{"clicked thing", "q", "s"}));
}

TEST(Mmr, HandTracedRedundancyExample) {
    RankInput input;
    input.clicked = phrase("clicked", 0.0);
    input.k = 3;
    input.lambda = 0.5;
    SimilarityFn sim = [](const std::string& a, const std::string& b) {
        std::set<std::string> pair{a, b};
        if (pair == std::set<std::string>{"g1", "g2"}) return 0.95;
        if (a == "clicked" || b == "clicked") return 0.0;
        if (a == b) return 1.0;
        return 0.1;
    };
    std::vector<GuidancePhrase> pool{phrase("g1", 0.9), phrase("g2", 0.85), phrase("g3", 0.4)};
    EXPECT_EQ(texts(*mmr_select(input, pool, sim)), (std::vector<std::string>{"clicked", "g1", "g3"}));
}

TEST(Mmr, LambdaZeroFirstPickIsLeastSimilarToClick) {
    RankInput input;
    input.clicked = phrase("buy stocks now", 0.0);
    input.k = 2;
    input.lambda = 0.0;
    std::vector<GuidancePhrase> pool{phrase("buy stocks today", 0.99), phrase("sell bonds later", 0.01),
                                     phrase("buy bonds now", 0.5)};
    EXPECT_EQ((*mmr_select(input, pool))[1].text, "sell bonds later");
}

TEST(Mmr, DropsPoolCopyOfClickAndReportsShortPools) {
    RankInput input;
    input.clicked = phrase("Same Thing", 0.2);
    input.k = 3;
    std::vector<GuidancePhrase> pool{phrase("same thing", 0.9), phrase("other", 0.5)};
    EXPECT_FALSE(mmr_select(input, pool).has_value());
    pool.push_back(phrase("third", 0.4));
    EXPECT_EQ(texts(*mmr_select(input, pool)), (std::vector<std::string>{"Same Thing", "other", "third"}));
}

TEST(Mmr, MatchesExhaustiveGreedyTraceOnSmallPools) {
    SeededRng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        auto [input, pool] = test_support::random_mmr_case(rng);
        auto got = mmr_select(input, pool);
        ASSERT_TRUE(got);
        auto traces = test_support::greedy_consistent_traces(input, pool, similarity);
        ASSERT_EQ(traces.size(), 1u) << "trial " << trial;
        EXPECT_EQ(texts(*got), traces.front()) << "trial " << trial;

        auto reversed = pool;
        std::reverse(reversed.begin(), reversed.end());
        EXPECT_EQ(texts(*mmr_select(input, reversed)), texts(*got));
    }
}

TEST(Dispreferred, SkipsWhenTooFewEligible) {
    RankInput input;
    input.k = 2;
    std::vector<GuidancePhrase> unselected{phrase("a", 0.6), phrase("b", 0.7)};
    EXPECT_FALSE(sample_dispreferred(input, unselected, 0.5).has_value());
    EXPECT_FALSE(sample_dispreferred(input, unselected, 0.7).has_value());
}

TEST(Dispreferred, ExactlyKEligibleTakesAll) {
    std::vector<GuidancePhrase> unselected{phrase("a", 0.1), phrase("b", 0.2), phrase("c", 0.9)};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RankInput input;
        input.k = 2;
        input.seed = seed;
        auto got = sample_dispreferred(input, unselected, 0.5);
        ASSERT_TRUE(got);
        auto names = texts(*got);
        std::sort(names.begin(), names.end());
        EXPECT_EQ(names, (std::vector<std::string>{"a", "b"}));
    }
}

TEST(Dispreferred, SeededAndOrderIndependent) {
    std::vector<GuidancePhrase> unselected;
    for (const char* t : {"a", "b", "c", "d", "e", "f"}) unselected.push_back(phrase(t, 0.1));
    RankInput input;
    input.k = 3;
    input.seed = 99;
    auto first = sample_dispreferred(input, unselected, 0.5);
    auto reversed = unselected;
    std::reverse(reversed.begin(), reversed.end());
    EXPECT_EQ(texts(*first), texts(*sample_dispreferred(input, unselected, 0.5)));
    EXPECT_EQ(texts(*first), texts(*sample_dispreferred(input, reversed, 0.5)));
    std::set<std::vector<std::string>> distinct;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        input.seed = seed;
        distinct.insert(texts(*sample_dispreferred(input, unselected, 0.5)));
    }
    EXPECT_GT(distinct.size(), 1u);
}

TEST(RankCandidates, FullOutcomeSatisfiesInvariants) {
    auto m = matrix_of({{{"buy stocks", 0.9}, {"sell stocks", 0.3}, {"stock tax", 0.2}},
                        {{"bond yields", 0.8}, {"bond funds", 0.6}, {"bond tax", 0.1}},
                        {{"etf basics", 0.7}, {"etf fees", 0.15}, {"etf tax", 0.05}}});
    RankInput input{m, phrase("how to start investing", 0.0), "investing", 3, 0.5, 4};
    auto outcome = rank_candidates(input);
    ASSERT_FALSE(outcome.skipped) << outcome.skip_reason;
    EXPECT_EQ(outcome.preferred.front().text, "how to start investing");
    EXPECT_TRUE(check_outcome(outcome, 3).empty());
    auto record = build_k_pair("investing", "start small", ContextBundle{}, outcome, 3);
    EXPECT_EQ(std::count(record.chosen.begin(), record.chosen.end(), '\n'), 2);
    EXPECT_EQ(std::count(record.rejected.begin(), record.rejected.end(), '\n'), 2);
    EXPECT_EQ(record.arity, PairArity::k_pair);
    EXPECT_EQ(json::parse(to_jsonl_line(json(record))).get<PreferenceRecord>(), record);
}

TEST(RankCandidates, ShortEligiblePoolIsSkipped) {
    // pool {a, b}; MMR takes a, leaving only b below the 0.9 threshold
    auto m = matrix_of({{{"a", 0.9}, {"b", 0.1}}});
    RankInput input{m, phrase("clicked", 0.0), "q", 2, 0.5, 1};
    auto outcome = rank_candidates(input);
    EXPECT_TRUE(outcome.skipped);
    EXPECT_EQ(outcome.skip_reason, kSkipTooFewDispreferred);
    EXPECT_THROW(build_k_pair("q", "a", ContextBundle{}, outcome, 2), ValidationError);
}

TEST(RankCandidates, RejectsInvalidInput) {
    auto m = matrix_of({{{"a", 0.9}}});
    RankInput input{m, phrase("clicked", 0.0), "q", 1, 1.5, 1};
    EXPECT_THROW(rank_candidates(input), ValidationError);
    input.lambda = 0.5;
    input.matrix.rows[0][0].ce_score = 1.5;
    EXPECT_THROW(rank_candidates(input), ValidationError);
}

TEST(CheckOutcome, FlagsOverlapAndCeViolations) {
    RankOutcome bad;
    bad.preferred = {phrase("c", 0.0), phrase("x", 0.5), phrase("y", 0.6)};
    bad.dispreferred = {phrase("x", 0.5), phrase("z", 0.55), phrase("w", 0.1)};
    auto report = check_outcome(bad, 3);
    EXPECT_TRUE(report_mentions(report, "also preferred"));
    EXPECT_TRUE(report_mentions(report, "not below preferred minimum"));
}
