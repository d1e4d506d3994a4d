#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "proguide/core/types.hpp"
#include "proguide/decode/dbs.hpp"
#include "proguide/rank/preference_ranker.hpp"
#include "proguide/train/objectives.hpp"

namespace proguide {

// Backend selectors are either a built-in name or an http(s) URL:
//   goal_backend:    "mock" (keyword shift agent) | URL
//   answer_backend:  "echo" | URL
//   teacher_backend: "" (none) | path of canned completions (JSONL) | URL
//   ce_backend:      "lexical" | "model" (ce_model path) | URL
struct EngineConfig {
    int k = static_cast<int>(kDefaultGuidanceCount);
    DbsConfig dbs{4, 4, 0.5, 2, 16};
    double lambda = kDefaultLambda;
    double beta = kDefaultBeta;
    std::uint64_t seed = 0;
    std::string data_dir = "data";
    std::string phrase_corpus = "resources/phrases.txt";
    std::size_t summary_cap = kDefaultSummaryCap;
    bool persist_matrix = true;
    int gaa_max_attempts = 2;
    int teacher_candidates = 5;

    std::string goal_backend = "mock";
    std::string answer_backend = "echo";
    std::string teacher_backend;
    std::string ce_backend = "lexical";
    std::string ce_model;
    int goal_delay_ms = 0;  // artificial latency of the built-in mocks
    int answer_delay_ms = 0;
    int http_timeout_ms = 10000;

    std::string host = "127.0.0.1";
    int port = 8080;

    // Throws ValidationError on out-of-range values.
    void validate() const;
    std::filesystem::path event_log_path() const { return std::filesystem::path(data_dir) / "events.jsonl"; }
};

nlohmann::json config_to_json(const EngineConfig& config);
// Keys missing from `j` keep their current value; unknown keys are rejected.
void merge_config(EngineConfig& config, const nlohmann::json& j);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Every config leaf can be overridden by PROGUIDE_<PATH>, the path upper-cased
// and joined by '_' (PROGUIDE_K, PROGUIDE_DBS_NUM_GROUPS, ...).
void apply_env_overrides(EngineConfig& config, const EnvLookup& env = process_env);

// Defaults, then the file (explicit path, else $PROGUIDE_CONFIG when set),
// then environment overrides. The result is validated.
EngineConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env);

}  // namespace proguide
