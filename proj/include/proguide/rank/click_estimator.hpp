#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace proguide {

inline constexpr std::uint32_t kHashBits = 18;
inline constexpr std::uint32_t kHashDim = 1u << kHashBits;

// Sparse features sorted by index, indices unique and < kHashDim.
struct FeatureVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
    double dot(std::span<const double> dense) const;
    bool operator==(const FeatureVector&) const = default;
};

// Index of a named feature: FNV-1a of "<ns>\x1f<key>" folded into the hash
// space.
std::uint32_t feature_index(std::string_view ns, std::string_view key);

// Character n-grams (orders 2-4, case-folded code points) of the query and
// of the guidance in separate namespaces, n-grams present in both in an
// interaction namespace, and one overlap feature (Jaccard of the two n-gram
// sets). Each namespace is L2-normalized.
FeatureVector featurize(const std::string& query, const std::string& guidance);

// Distinct character n-grams of orders 2-4.
std::vector<std::string> char_ngrams(const std::string& text);

struct CeExample {
    std::string query;
    std::string guidance;
    int label = 0;

    bool operator==(const CeExample&) const = default;
};

struct CeHyperparams {
    double learning_rate = 0.1;
    int epochs = 5;
    std::uint64_t seed = 0;
    double validation_fraction = 0.2;
};

struct CeModel {
    std::vector<double> weights = std::vector<double>(kHashDim, 0.0);
    double bias = 0.0;
    int epochs = 0;
    // train_losses[0] is the loss before the first epoch, then one per epoch;
    // same for validation_losses when a validation split exists.
    std::vector<double> train_losses;
    std::vector<double> validation_losses;
    std::optional<double> validation_auc;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
};

inline constexpr double kProbabilityClamp = 1e-12;

// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
// Throws ValidationError on empty or mismatched inputs or labels outside {0,1}.
double bce_loss(std::span<const int> labels, std::span<const double> predictions);

double logistic(double z);

// Gradient of the mean BCE of `examples` with respect to the weights and the
// bias. Weights come back sparse (index, value).
struct CeGradient {
    std::vector<std::pair<std::uint32_t, double>> weights;
    double bias = 0.0;
};
CeGradient bce_gradient(const CeModel& model, const std::vector<CeExample>& examples);

// Plain SGD over featurized examples. The dataset is sorted canonically
// first, then split and shuffled with `seed`, so the result depends on the
// multiset of examples and the seed only. Throws ValidationError when the
// dataset lacks either class.
CeModel train_ce(const std::vector<CeExample>& dataset, const CeHyperparams& hyper = {});

double predict_ce(const CeModel& model, const std::string& query, const std::string& guidance);
double predict_ce(const CeModel& model, const FeatureVector& features);

// Area under the ROC curve (Mann-Whitney, ties count one half). Throws
// ValidationError unless both classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

// Sparse JSON: {"hash_bits", "bias", "weights": [[index, value], ...], ...}.
nlohmann::json model_to_json(const CeModel& model);
CeModel model_from_json(const nlohmann::json& j);
void save_model(const CeModel& model, const std::filesystem::path& path);
CeModel load_model(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const CeExample& example);
void from_json(const nlohmann::json& j, CeExample& example);

// Click probability of a guidance phrase for a query. Implementations are
// thread-safe.
class ClickScorer {
public:
    virtual ~ClickScorer() = default;
    virtual double score(const std::string& query, const std::string& guidance) const = 0;
};

class ModelClickScorer : public ClickScorer {
public:
    explicit ModelClickScorer(CeModel model) : model_(std::move(model)) {}
    double score(const std::string& query, const std::string& guidance) const override {
        return predict_ce(model_, query, guidance);
    }
    const CeModel& model() const { return model_; }

private:
    CeModel model_;
};

}  // namespace proguide
