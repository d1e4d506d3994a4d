#include "proguide/train/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "proguide/core/json_io.hpp"
#include "proguide/core/text.hpp"

namespace proguide {

namespace {

void check_batch(const ToyPolicy& policy, const ToyPolicy& reference, const DpoBatch& batch) {
    if (batch.items.empty()) throw ValidationError("DPO batch is empty");
    if (!(batch.beta > 0.0)) throw ValidationError("beta must be > 0");
    for (const auto& item : batch.items) {
        if (item.chosen == item.rejected) throw ValidationError("DPO item has chosen == rejected");
        for (const ToyPolicy* p : {&policy, &reference}) {
            if (item.context >= p->contexts() || item.chosen >= p->candidates(item.context) ||
                item.rejected >= p->candidates(item.context)) {
                throw ValidationError("DPO item refers to a missing table entry");
            }
        }
    }
}

double item_margin(const ToyPolicy& policy, const ToyPolicy& reference, const DpoItem& item, double beta) {
    const double chosen = policy.log_prob(item.context, item.chosen) - reference.log_prob(item.context, item.chosen);
    const double rejected =
        policy.log_prob(item.context, item.rejected) - reference.log_prob(item.context, item.rejected);
    return beta * (chosen - rejected);
}

void check_lines(const std::string& side, std::size_t expected, const char* what) {
    auto lines = split_lines(side);
    if (lines.size() != expected) {
        throw ValidationError(std::string(what) + " must hold " + std::to_string(expected) + " phrase(s), found " +
                              std::to_string(lines.size()));
    }
    for (const auto& line : lines) {
        if (trim(line).empty()) throw ValidationError(std::string(what) + " holds an empty phrase");
    }
}

void check_preference(const PreferenceRecord& record, std::size_t k) {
    const std::size_t expected = record.arity == PairArity::k_pair ? k : 1;
    check_lines(record.chosen, expected, "chosen");
    check_lines(record.rejected, expected, "rejected");
    if (record.chosen == record.rejected) throw ValidationError("chosen equals rejected");
}

json parse_line(const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed record line: ") + e.what());
    }
}

std::string string_field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
        throw ParseError(std::string("record lacks string field ") + key);
    }
    return j.at(key).get<std::string>();
}

}  // namespace

double sft_loss(const TokenScorer& scorer, std::span<const TokenId> input, std::span<const TokenId> target) {
    if (target.empty()) throw ValidationError("SFT target is empty");
    const auto& vocab = scorer.vocabulary();
    for (TokenId t : input) {
        if (!vocab.contains(t)) throw ValidationError("input token outside the vocabulary");
    }
    TokenSeq prefix(input.begin(), input.end());
    double loss = 0.0;
    for (TokenId t : target) {
        if (!vocab.contains(t)) throw ValidationError("target token outside the vocabulary");
        loss -= scorer.log_probs(prefix)[static_cast<std::size_t>(t)];
        prefix.push_back(t);
    }
    return loss;
}

ToyPolicy::ToyPolicy(std::vector<std::vector<double>> theta) : theta_(std::move(theta)) {
    for (const auto& row : theta_) {
        if (row.empty()) throw ValidationError("every context needs at least one candidate");
    }
}

ToyPolicy ToyPolicy::uniform(std::size_t contexts, std::size_t candidates) {
    return ToyPolicy(std::vector<std::vector<double>>(contexts, std::vector<double>(candidates, 0.0)));
}

std::size_t ToyPolicy::candidates(std::size_t context) const { return theta_.at(context).size(); }

double ToyPolicy::theta(std::size_t context, std::size_t candidate) const { return theta_.at(context).at(candidate); }

double& ToyPolicy::theta(std::size_t context, std::size_t candidate) { return theta_.at(context).at(candidate); }

double ToyPolicy::log_prob(std::size_t context, std::size_t candidate) const {
    const auto& row = theta_.at(context);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double t : row) z += std::exp(t - peak);
    return row.at(candidate) - peak - std::log(z);
}

std::vector<double> ToyPolicy::probs(std::size_t context) const {
    std::vector<double> out;
    for (std::size_t y = 0; y < candidates(context); ++y) out.push_back(std::exp(log_prob(context, y)));
    return out;
}

double neg_log_sigmoid(double z) { return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const DpoBatch& batch) {
    check_batch(policy, reference, batch);
    double total = 0.0;
    for (const auto& item : batch.items) total += neg_log_sigmoid(item_margin(policy, reference, item, batch.beta));
    return total / static_cast<double>(batch.items.size());
}

std::vector<std::vector<double>> dpo_grad(const ToyPolicy& policy, const ToyPolicy& reference, const DpoBatch& batch) {
    check_batch(policy, reference, batch);
    std::vector<std::vector<double>> grad;
    for (const auto& row : policy.table()) grad.emplace_back(row.size(), 0.0);
    const double n = static_cast<double>(batch.items.size());
    for (const auto& item : batch.items) {
        const double z = item_margin(policy, reference, item, batch.beta);
        // d(-log sigmoid z)/dz = -sigmoid(-z); the softmax normalizer terms of
        // chosen and rejected cancel because both share the context.
        const double outer = -batch.beta / (1.0 + std::exp(z)) / n;
        grad[item.context][item.chosen] += outer;
        grad[item.context][item.rejected] -= outer;
    }
    return grad;
}

std::string serialize_sft(const SftSample& sample, std::size_t k) {
    check_lines(sample.response, k, "response");
    return to_jsonl_line(json{{"prompt", sample.prompt}, {"response", sample.response}});
}

SftSample parse_sft(const std::string& line, std::size_t k) {
    auto j = parse_line(line);
    SftSample sample{string_field(j, "prompt"), string_field(j, "response")};
    check_lines(sample.response, k, "response");
    return sample;
}

std::string serialize_preference(const PreferenceRecord& record, std::size_t k) {
    check_preference(record, k);
    return to_jsonl_line(json{{"prompt", record.input},
                              {"chosen", record.chosen},
                              {"rejected", record.rejected},
                              {"arity", to_string(record.arity)}});
}

PreferenceRecord parse_preference(const std::string& line, std::size_t k) {
    auto j = parse_line(line);
    PreferenceRecord record{string_field(j, "prompt"), string_field(j, "chosen"), string_field(j, "rejected"),
                            pair_arity_from_string(string_field(j, "arity"))};
    check_preference(record, k);
    return record;
}

}  // namespace proguide
