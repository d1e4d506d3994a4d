#include "proguide/decode/phrase_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "proguide/core/json_io.hpp"
#include "proguide/core/text.hpp"
#include "proguide/core/types.hpp"

namespace proguide {

PhraseModelScorer PhraseModelScorer::from_phrases(const std::vector<std::string>& phrases, const Options& options) {
    std::set<std::string> words;
    std::vector<std::vector<std::string>> tokenized;
    for (const auto& p : phrases) {
        auto w = split_words(p);
        if (w.empty()) continue;
        words.insert(w.begin(), w.end());
        tokenized.push_back(std::move(w));
    }
    if (tokenized.empty()) throw ValidationError("phrase model needs at least one non-empty phrase");

    PhraseModelScorer model;
    model.options_ = options;
    model.vocab_.add("</s>");
    model.vocab_.add("<sep>");
    for (const auto& w : words) model.vocab_.add(w);

    const std::size_t v = model.vocab_.size();
    std::vector<std::vector<double>> counts(v, std::vector<double>(v, 0.0));
    for (const auto& phrase : tokenized) {
        TokenId prev = model.separator();
        for (const auto& w : phrase) {
            TokenId cur = model.vocab_.id(w);
            counts[static_cast<std::size_t>(prev)][static_cast<std::size_t>(cur)] += 1.0;
            prev = cur;
        }
        counts[static_cast<std::size_t>(prev)][0] += 1.0;
    }

    // <sep> is never generated; every other token gets alpha pseudo-counts.
    model.bigram_.assign(v, std::vector<double>(v, kLogZero));
    for (std::size_t prev = 0; prev < v; ++prev) {
        double total = 0.0;
        for (std::size_t next = 0; next < v; ++next) {
            if (next == 1) continue;
            total += counts[prev][next] + options.smoothing;
        }
        for (std::size_t next = 0; next < v; ++next) {
            if (next == 1) continue;
            model.bigram_[prev][next] = std::log((counts[prev][next] + options.smoothing) / total);
        }
    }
    return model;
}

PhraseModelScorer PhraseModelScorer::load(const std::filesystem::path& path, const Options& options) {
    std::vector<std::string> phrases;
    for (const auto& line : split_lines(read_text_file(path))) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        phrases.push_back(t);
    }
    return from_phrases(phrases, options);
}

TokenSeq PhraseModelScorer::encode_prompt(const std::string& prompt_text) const {
    TokenSeq out;
    for (const auto& w : split_words(prompt_text)) {
        if (auto id = vocab_.find(w); id && *id > 1) out.push_back(*id);
    }
    out.push_back(separator());
    return out;
}

std::vector<double> PhraseModelScorer::log_probs(std::span<const TokenId> prefix) const {
    const std::size_t v = vocab_.size();
    for (TokenId t : prefix) {
        if (!vocab_.contains(t)) throw std::out_of_range("token id out of range: " + std::to_string(t));
    }
    std::size_t sep_pos = prefix.size();
    for (std::size_t i = prefix.size(); i-- > 0;) {
        if (prefix[i] == separator()) {
            sep_pos = i;
            break;
        }
    }
    // Without a separator the whole prefix is continuation.
    const std::size_t continuation_begin = sep_pos < prefix.size() ? sep_pos + 1 : 0;
    const TokenId prev = continuation_begin == prefix.size() ? separator() : prefix.back();

    std::vector<bool> bonus(v, false);
    if (sep_pos < prefix.size()) {
        for (std::size_t i = 0; i < sep_pos; ++i) bonus[static_cast<std::size_t>(prefix[i])] = true;
        for (std::size_t i = sep_pos + 1; i < prefix.size(); ++i) bonus[static_cast<std::size_t>(prefix[i])] = false;
    }

    std::vector<double> logits = bigram_[static_cast<std::size_t>(prev)];
    double max_logit = kLogZero;
    for (std::size_t t = 0; t < v; ++t) {
        if (logits[t] <= kLogZero) continue;
        if (bonus[t]) logits[t] += options_.prompt_bonus;
        max_logit = std::max(max_logit, logits[t]);
    }
    double z = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
        if (logits[t] > kLogZero) z += std::exp(logits[t] - max_logit);
    }
    const double log_z = max_logit + std::log(z);
    for (std::size_t t = 0; t < v; ++t) {
        logits[t] = logits[t] > kLogZero ? logits[t] - log_z : kLogZero;
    }
    return logits;
}

}  // namespace proguide
