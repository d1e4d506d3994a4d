#include "proguide/decode/token_scorer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "proguide/core/json_io.hpp"
#include "proguide/core/text.hpp"
#include "proguide/core/types.hpp"

namespace proguide {

Vocabulary::Vocabulary(std::vector<std::string> words) {
    for (auto& w : words) add(w);
}

TokenId Vocabulary::add(const std::string& word) {
    if (auto it = ids_.find(word); it != ids_.end()) return it->second;
    auto id = static_cast<TokenId>(words_.size());
    words_.push_back(word);
    ids_.emplace(word, id);
    return id;
}

std::optional<TokenId> Vocabulary::find(const std::string& word) const {
    if (auto it = ids_.find(word); it != ids_.end()) return it->second;
    return std::nullopt;
}

TokenId Vocabulary::id(const std::string& word) const {
    if (auto found = find(word)) return *found;
    throw std::out_of_range("token not in vocabulary: " + word);
}

const std::string& Vocabulary::word(TokenId id) const {
    if (!contains(id)) throw std::out_of_range("token id out of range: " + std::to_string(id));
    return words_[static_cast<std::size_t>(id)];
}

std::string TokenScorer::detokenize(std::span<const TokenId> tokens) const {
    std::string out;
    for (TokenId t : tokens) {
        if (t == eos()) continue;
        const std::string& w = vocabulary().word(t);
        if (w.size() > 1 && w.front() == '<' && w.back() == '>') continue;
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

double normalization_error(std::span<const double> log_probs) {
    double total = 0.0;
    for (double lp : log_probs) total += std::exp(lp);
    return std::abs(total - 1.0);
}

UniformScorer::UniformScorer(std::size_t vocab_size) {
    if (vocab_size < 1) throw ValidationError("uniform scorer needs at least one token");
    vocab_.add("</s>");
    for (std::size_t i = 1; i < vocab_size; ++i) vocab_.add("t" + std::to_string(i));
}

std::vector<double> UniformScorer::log_probs(std::span<const TokenId>) const {
    return std::vector<double>(vocab_.size(), -std::log(static_cast<double>(vocab_.size())));
}

NgramTableScorer::NgramTableScorer(Vocabulary vocab, TokenId eos, std::map<TokenSeq, std::vector<double>> rows)
    : vocab_(std::move(vocab)), eos_(eos), rows_(std::move(rows)) {
    if (!vocab_.contains(eos_)) throw ValidationError("end-of-sequence token outside the vocabulary");
    for (const auto& [prefix, row] : rows_) {
        order_ = std::max(order_, prefix.size() + 1);
        if (row.size() != vocab_.size()) throw ValidationError("n-gram row has the wrong width");
    }
}

NgramTableScorer NgramTableScorer::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

NgramTableScorer NgramTableScorer::parse(const std::string& text) {
    Vocabulary vocab;
    std::optional<std::string> eos_word;
    std::map<TokenSeq, std::vector<double>> probs;
    std::vector<std::pair<std::vector<std::string>, std::pair<std::string, double>>> entries;

    std::size_t line_no = 0;
    for (const auto& raw : split_lines(text)) {
        ++line_no;
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line.front() == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
        auto where = "line " + std::to_string(line_no);
        if (cols[0] == "@vocab") {
            if (cols.size() != 2) throw ParseError(where + ": @vocab needs one column");
            for (auto& w : split_lines(cols[1])) {
                std::stringstream ws(w);
                for (std::string tok; ws >> tok;) vocab.add(tok);
            }
            continue;
        }
        if (cols[0] == "@eos") {
            if (cols.size() != 2) throw ParseError(where + ": @eos needs one column");
            eos_word = trim(cols[1]);
            continue;
        }
        if (cols.size() != 3) throw ParseError(where + ": expected prefix, token, probability");
        std::vector<std::string> prefix;
        if (cols[0] != "-") {
            std::stringstream ps(cols[0]);
            for (std::string tok; ps >> tok;) prefix.push_back(tok);
        }
        double p = 0.0;
        try {
            p = std::stod(cols[2]);
        } catch (const std::exception&) {
            throw ParseError(where + ": bad probability '" + cols[2] + "'");
        }
        if (!(p >= 0.0 && p <= 1.0)) throw ParseError(where + ": probability outside [0,1]");
        entries.push_back({std::move(prefix), {trim(cols[1]), p}});
    }
    if (vocab.size() == 0) throw ParseError("n-gram table lacks an @vocab line");
    if (!eos_word) throw ParseError("n-gram table lacks an @eos line");

    auto to_id = [&](const std::string& w) {
        auto id = vocab.find(w);
        if (!id) throw ParseError("token '" + w + "' is not in @vocab");
        return *id;
    };

    std::map<TokenSeq, std::vector<double>> table;
    for (const auto& [prefix_words, next] : entries) {
        TokenSeq prefix;
        for (const auto& w : prefix_words) prefix.push_back(to_id(w));
        auto& row = table[prefix];
        if (row.empty()) row.assign(vocab.size(), 0.0);
        row[static_cast<std::size_t>(to_id(next.first))] = next.second;
    }
    for (auto& [prefix, row] : table) {
        double total = 0.0;
        for (double p : row) total += p;
        if (std::abs(total - 1.0) > 1e-6) {
            throw ParseError("probabilities for a prefix sum to " + std::to_string(total) + ", not 1");
        }
        for (double& p : row) p = p > 0.0 ? std::log(p) : kLogZero;
    }
    return NgramTableScorer(std::move(vocab), to_id(*eos_word), std::move(table));
}

std::vector<double> NgramTableScorer::log_probs(std::span<const TokenId> prefix) const {
    const std::size_t longest = std::min(prefix.size(), order_ - 1);
    for (std::size_t n = longest + 1; n-- > 0;) {
        TokenSeq context(prefix.end() - static_cast<std::ptrdiff_t>(n), prefix.end());
        if (auto it = rows_.find(context); it != rows_.end()) return it->second;
    }
    return std::vector<double>(vocab_.size(), -std::log(static_cast<double>(vocab_.size())));
}

TokenSeq NgramTableScorer::encode(const std::string& text) const {
    TokenSeq out;
    std::stringstream ss(text);
    for (std::string w; ss >> w;) out.push_back(vocab_.id(w));
    return out;
}

}  // namespace proguide
