#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "proguide/core/types.hpp"
#include "proguide/decode/token_scorer.hpp"

namespace proguide {

// Token negative log-likelihood of `target` after `input`:
// -sum_t log P(y_t | x, y_<t). Throws ValidationError for an empty target or a
// token outside the scorer vocabulary.
double sft_loss(const TokenScorer& scorer, std::span<const TokenId> input, std::span<const TokenId> target);

// Softmax policy over a finite candidate set per context:
// log pi(y|x) = theta[x][y] - logsumexp(theta[x]).
class ToyPolicy {
public:
    ToyPolicy() = default;
    explicit ToyPolicy(std::vector<std::vector<double>> theta);
    // All-zero parameters: uniform over `candidates` for each context.
    static ToyPolicy uniform(std::size_t contexts, std::size_t candidates);

    std::size_t contexts() const { return theta_.size(); }
    std::size_t candidates(std::size_t context) const;
    double theta(std::size_t context, std::size_t candidate) const;
    double& theta(std::size_t context, std::size_t candidate);
    const std::vector<std::vector<double>>& table() const { return theta_; }

    double log_prob(std::size_t context, std::size_t candidate) const;
    std::vector<double> probs(std::size_t context) const;

private:
    std::vector<std::vector<double>> theta_;
};

struct DpoItem {
    std::size_t context = 0;
    std::size_t chosen = 0;
    std::size_t rejected = 0;
};

inline constexpr double kDefaultBeta = 0.1;

struct DpoBatch {
    std::vector<DpoItem> items;
    double beta = kDefaultBeta;
};

// Mean over items of -log sigmoid(beta * [(log pi(y_w|x) - log ref(y_w|x))
// - (log pi(y_l|x) - log ref(y_l|x))]). Throws ValidationError for an empty
// batch, beta <= 0, chosen == rejected or an entry missing from either table.
double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const DpoBatch& batch);

// Analytic gradient of dpo_loss with respect to the policy table (same shape).
std::vector<std::vector<double>> dpo_grad(const ToyPolicy& policy, const ToyPolicy& reference, const DpoBatch& batch);

// -log sigmoid(z), stable for large |z|.
double neg_log_sigmoid(double z);

struct SftSample {
    std::string prompt;
    std::string response;  // k phrases joined by newline

    bool operator==(const SftSample&) const = default;
};

// {"prompt", "response"}; throws ValidationError unless the response holds
// exactly k non-empty lines.
std::string serialize_sft(const SftSample& sample, std::size_t k = kDefaultGuidanceCount);
SftSample parse_sft(const std::string& line, std::size_t k = kDefaultGuidanceCount);

// {"prompt", "chosen", "rejected", "arity"}; one-pair sides hold a single
// phrase, k-pair sides exactly k lines. Throws ValidationError on arity
// mismatch, ParseError on malformed lines.
std::string serialize_preference(const PreferenceRecord& record, std::size_t k = kDefaultGuidanceCount);
PreferenceRecord parse_preference(const std::string& line, std::size_t k = kDefaultGuidanceCount);

}  // namespace proguide
