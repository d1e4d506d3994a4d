#include "proguide/rank/click_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "proguide/core/json_io.hpp"
#include "proguide/core/random.hpp"
#include "proguide/core/text.hpp"
#include "proguide/core/types.hpp"

namespace proguide {

namespace {

using SparseMap = std::map<std::uint32_t, double>;

void add_normalized(SparseMap& into, const SparseMap& ns) {
    double norm = 0.0;
    for (const auto& [i, v] : ns) norm += v * v;
    if (norm == 0.0) return;
    norm = std::sqrt(norm);
    for (const auto& [i, v] : ns) into[i] += v / norm;
}

std::vector<std::string> all_char_ngrams(const std::string& text) {
    auto cps = decode_utf8(casefold(text));
    std::vector<std::string> out;
    for (std::size_t n = 2; n <= 4; ++n) {
        for (std::size_t i = 0; i + n <= cps.size(); ++i) {
            out.push_back(encode_utf8(std::vector<char32_t>(cps.begin() + static_cast<std::ptrdiff_t>(i),
                                                            cps.begin() + static_cast<std::ptrdiff_t>(i + n))));
        }
    }
    return out;
}

struct Featurized {
    FeatureVector x;
    int y;
};

std::vector<Featurized> featurize_all(const std::vector<CeExample>& examples) {
    std::vector<Featurized> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back({featurize(e.query, e.guidance), e.label});
    return out;
}

double mean_loss(const CeModel& model, const std::vector<Featurized>& data) {
    std::vector<int> labels;
    std::vector<double> preds;
    for (const auto& d : data) {
        labels.push_back(d.y);
        preds.push_back(predict_ce(model, d.x));
    }
    return bce_loss(labels, preds);
}

void check_label(int label) {
    if (label != 0 && label != 1) throw ValidationError("labels must be 0 or 1");
}

}  // namespace

double FeatureVector::dot(std::span<const double> dense) const {
    double total = 0.0;
    for (const auto& [i, v] : entries) total += dense[i] * v;
    return total;
}

std::uint32_t feature_index(std::string_view ns, std::string_view key) {
    std::string name(ns);
    name.push_back('\x1f');
    name.append(key);
    return static_cast<std::uint32_t>(fnv1a64(name) & (kHashDim - 1));
}

std::vector<std::string> char_ngrams(const std::string& text) {
    auto grams = all_char_ngrams(text);
    std::set<std::string> distinct(grams.begin(), grams.end());
    return {distinct.begin(), distinct.end()};
}

FeatureVector featurize(const std::string& query, const std::string& guidance) {
    SparseMap q, g, x, merged;
    for (const auto& gram : all_char_ngrams(query)) q[feature_index("q", gram)] += 1.0;
    for (const auto& gram : all_char_ngrams(guidance)) g[feature_index("g", gram)] += 1.0;

    const auto qs = char_ngrams(query);
    const auto gs = char_ngrams(guidance);
    std::vector<std::string> shared;
    std::set_intersection(qs.begin(), qs.end(), gs.begin(), gs.end(), std::back_inserter(shared));
    for (const auto& gram : shared) x[feature_index("x", gram)] += 1.0;

    add_normalized(merged, q);
    add_normalized(merged, g);
    add_normalized(merged, x);
    if (!shared.empty()) {
        const double union_size = static_cast<double>(qs.size() + gs.size() - shared.size());
        merged[feature_index("x", "\x01jaccard")] += static_cast<double>(shared.size()) / union_size;
    }

    FeatureVector out;
    out.entries.assign(merged.begin(), merged.end());
    return out;
}

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_loss(std::span<const int> labels, std::span<const double> predictions) {
    if (labels.empty()) throw ValidationError("bce_loss needs at least one example");
    if (labels.size() != predictions.size()) throw ValidationError("bce_loss: labels and predictions differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        check_label(labels[i]);
        const double p = std::clamp(predictions[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
        total += labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return -total / static_cast<double>(labels.size());
}

CeGradient bce_gradient(const CeModel& model, const std::vector<CeExample>& examples) {
    if (examples.empty()) throw ValidationError("bce_gradient needs at least one example");
    SparseMap grad;
    CeGradient out;
    const double scale = 1.0 / static_cast<double>(examples.size());
    for (const auto& e : examples) {
        check_label(e.label);
        auto x = featurize(e.query, e.guidance);
        // Unclamped derivative; the clamp only matters within 1e-12 of 0 or 1.
        const double residual = (predict_ce(model, x) - e.label) * scale;
        for (const auto& [i, v] : x.entries) grad[i] += residual * v;
        out.bias += residual;
    }
    out.weights.assign(grad.begin(), grad.end());
    return out;
}

CeModel train_ce(const std::vector<CeExample>& dataset, const CeHyperparams& hyper) {
    if (hyper.epochs < 0) throw ValidationError("epochs must be >= 0");
    if (!(hyper.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (!(hyper.validation_fraction >= 0.0 && hyper.validation_fraction < 1.0)) {
        throw ValidationError("validation fraction must be in [0, 1)");
    }
    std::size_t positives = 0;
    for (const auto& e : dataset) {
        check_label(e.label);
        positives += static_cast<std::size_t>(e.label);
    }
    if (positives == 0 || positives == dataset.size()) {
        throw ValidationError("training data needs both clicked and unclicked examples (" + std::to_string(positives) +
                              " positive of " + std::to_string(dataset.size()) + ")");
    }

    std::vector<CeExample> sorted = dataset;
    std::sort(sorted.begin(), sorted.end(), [](const CeExample& a, const CeExample& b) {
        return std::tie(a.query, a.guidance, a.label) < std::tie(b.query, b.guidance, b.label);
    });
    SeededRng rng(hyper.seed);
    rng.shuffle(sorted);
    auto validation_size = static_cast<std::size_t>(std::floor(hyper.validation_fraction * static_cast<double>(sorted.size())));
    validation_size = std::min(validation_size, sorted.size() - 1);
    std::vector<CeExample> validation(sorted.end() - static_cast<std::ptrdiff_t>(validation_size), sorted.end());
    sorted.resize(sorted.size() - validation_size);

    auto train = featurize_all(sorted);
    auto valid = featurize_all(validation);

    CeModel model;
    model.train_size = train.size();
    model.validation_size = valid.size();
    model.train_losses.push_back(mean_loss(model, train));
    if (!valid.empty()) model.validation_losses.push_back(mean_loss(model, valid));

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            const auto& d = train[i];
            const double step = hyper.learning_rate * (predict_ce(model, d.x) - d.y);
            for (const auto& [idx, v] : d.x.entries) model.weights[idx] -= step * v;
            model.bias -= step;
        }
        model.epochs = epoch + 1;
        model.train_losses.push_back(mean_loss(model, train));
        if (!valid.empty()) model.validation_losses.push_back(mean_loss(model, valid));
    }

    if (!valid.empty()) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (const auto& d : valid) {
            labels.push_back(d.y);
            scores.push_back(predict_ce(model, d.x));
        }
        const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
        if (both) model.validation_auc = roc_auc(labels, scores);
    }
    return model;
}

double predict_ce(const CeModel& model, const FeatureVector& features) {
    // Keep saturated outputs strictly inside (0, 1).
    return std::clamp(logistic(features.dot(model.weights) + model.bias), std::numeric_limits<double>::min(),
                      std::nextafter(1.0, 0.0));
}

double predict_ce(const CeModel& model, const std::string& query, const std::string& guidance) {
    return predict_ce(model, featurize(query, guidance));
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw ValidationError("roc_auc: labels and scores differ in length");
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Average ranks (1-based) over tied scores.
    std::vector<double> rank(labels.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    double positives = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        check_label(labels[i]);
        if (labels[i] == 1) {
            positives += 1.0;
            rank_sum += rank[i];
        }
    }
    const double negatives = static_cast<double>(labels.size()) - positives;
    if (positives == 0.0 || negatives == 0.0) throw ValidationError("roc_auc needs both classes");
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

nlohmann::json model_to_json(const CeModel& model) {
    nlohmann::json weights = nlohmann::json::array();
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        if (model.weights[i] != 0.0) weights.push_back({i, model.weights[i]});
    }
    nlohmann::json j = {{"hash_bits", kHashBits},
                        {"bias", model.bias},
                        {"epochs", model.epochs},
                        {"train_losses", model.train_losses},
                        {"validation_losses", model.validation_losses},
                        {"validation_auc", model.validation_auc ? nlohmann::json(*model.validation_auc) : nlohmann::json(nullptr)},
                        {"train_size", model.train_size},
                        {"validation_size", model.validation_size},
                        {"weights", weights}};
    return j;
}

CeModel model_from_json(const nlohmann::json& j) {
    if (j.at("hash_bits").get<std::uint32_t>() != kHashBits) throw ParseError("click model uses a different hash size");
    CeModel model;
    model.bias = j.at("bias").get<double>();
    model.epochs = j.value("epochs", 0);
    model.train_losses = j.value("train_losses", std::vector<double>{});
    model.validation_losses = j.value("validation_losses", std::vector<double>{});
    if (j.contains("validation_auc") && !j.at("validation_auc").is_null()) {
        model.validation_auc = j.at("validation_auc").get<double>();
    }
    model.train_size = j.value("train_size", std::size_t{0});
    model.validation_size = j.value("validation_size", std::size_t{0});
    for (const auto& pair : j.at("weights")) {
        auto index = pair.at(0).get<std::size_t>();
        if (index >= kHashDim) throw ParseError("click model weight index outside the hash space");
        model.weights[index] = pair.at(1).get<double>();
    }
    return model;
}

void save_model(const CeModel& model, const std::filesystem::path& path) {
    write_text_file(path, model_to_json(model).dump() + "\n");
}

CeModel load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

void to_json(nlohmann::json& j, const CeExample& example) {
    j = nlohmann::json{{"query", example.query}, {"guidance", example.guidance}, {"label", example.label}};
}

void from_json(const nlohmann::json& j, CeExample& example) {
    example.query = j.at("query").get<std::string>();
    example.guidance = j.at("guidance").get<std::string>();
    example.label = j.at("label").get<int>();
    check_label(example.label);
}

}  // namespace proguide
