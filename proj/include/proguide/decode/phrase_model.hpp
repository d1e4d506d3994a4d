#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "proguide/decode/token_scorer.hpp"

namespace proguide {

struct PhraseModelOptions {
    double smoothing = 0.05;
    double prompt_bonus = 1.5;
};

// Desk-scale guidance generator: a word bigram model estimated from a corpus
// of guidance phrases, with add-alpha smoothing. Words of the prompt that the
// continuation has not used yet get a logit bonus, which is what makes the
// output depend on the query, answer and goal context.
//
// Prompts are encoded as the known words of the prompt text followed by the
// <sep> token; the scorer treats everything before the last <sep> as the
// prompt and everything after it as the continuation.
class PhraseModelScorer : public TokenScorer {
public:
    using Options = PhraseModelOptions;

    static PhraseModelScorer from_phrases(const std::vector<std::string>& phrases, const Options& options);
    static PhraseModelScorer from_phrases(const std::vector<std::string>& phrases) {
        return from_phrases(phrases, Options{});
    }
    // One phrase per line; blank lines and '#' comments ignored.
    static PhraseModelScorer load(const std::filesystem::path& path, const Options& options = Options{});

    const Vocabulary& vocabulary() const override { return vocab_; }
    TokenId eos() const override { return 0; }
    TokenId separator() const { return 1; }
    std::vector<double> log_probs(std::span<const TokenId> prefix) const override;

    TokenSeq encode_prompt(const std::string& prompt_text) const;

private:
    PhraseModelScorer() = default;

    Vocabulary vocab_;
    // bigram_[prev][next] = smoothed log-probability; prev == separator is the
    // phrase start.
    std::vector<std::vector<double>> bigram_;
    Options options_;
};

}  // namespace proguide
