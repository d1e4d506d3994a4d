#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace proguide {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Finite stand-in for log(0); exp() of it underflows to exactly 0.
inline constexpr double kLogZero = -1e9;

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> words);

    TokenId add(const std::string& word);
    std::optional<TokenId> find(const std::string& word) const;
    TokenId id(const std::string& word) const;  // throws std::out_of_range
    const std::string& word(TokenId id) const;
    std::size_t size() const { return words_.size(); }
    bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> ids_;
};

// Next-token distribution over a fixed vocabulary. Rows are normalized (their
// exponentials sum to 1) and every entry is finite. Implementations are
// deterministic and const-callable from several threads.
class TokenScorer {
public:
    virtual ~TokenScorer() = default;

    virtual const Vocabulary& vocabulary() const = 0;
    virtual TokenId eos() const = 0;
    virtual std::vector<double> log_probs(std::span<const TokenId> prefix) const = 0;

    std::size_t vocab_size() const { return vocabulary().size(); }

    // Space-joined words, end-of-sequence and other control tokens skipped.
    virtual std::string detokenize(std::span<const TokenId> tokens) const;
};

// |sum(exp(row)) - 1|
double normalization_error(std::span<const double> log_probs);

class UniformScorer : public TokenScorer {
public:
    explicit UniformScorer(std::size_t vocab_size);

    const Vocabulary& vocabulary() const override { return vocab_; }
    TokenId eos() const override { return 0; }
    std::vector<double> log_probs(std::span<const TokenId> prefix) const override;

private:
    Vocabulary vocab_;
};

// Scorer backed by an explicit n-gram table (the fixture format):
//
//   # comment
//   @vocab<TAB></s> A B
//   @eos<TAB></s>
//   <prefix tokens or "-"><TAB><next token><TAB><probability>
//
// Lookup uses the longest stored suffix of the prefix (at most order-1
// tokens), backing off to shorter ones and finally to a uniform row. Tokens
// absent from a matched row get kLogZero.
class NgramTableScorer : public TokenScorer {
public:
    static NgramTableScorer load(const std::filesystem::path& path);
    static NgramTableScorer parse(const std::string& text);

    NgramTableScorer(Vocabulary vocab, TokenId eos, std::map<TokenSeq, std::vector<double>> rows);

    const Vocabulary& vocabulary() const override { return vocab_; }
    TokenId eos() const override { return eos_; }
    std::vector<double> log_probs(std::span<const TokenId> prefix) const override;

    std::size_t order() const { return order_; }
    // Tokens of a space-separated string, every word must be in the vocabulary.
    TokenSeq encode(const std::string& text) const;

private:
    Vocabulary vocab_;
    TokenId eos_;
    std::map<TokenSeq, std::vector<double>> rows_;  // prefix -> log-probs
    std::size_t order_ = 1;
};

}  // namespace proguide
