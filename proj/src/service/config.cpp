#include "proguide/service/config.hpp"

#include <cctype>
#include <cstdlib>

#include "proguide/core/json_io.hpp"

namespace proguide {

void EngineConfig::validate() const {
    if (k < 1) throw ValidationError("k must be >= 1");
    dbs.validate();
    if (dbs.num_groups * dbs.beams_per_group < k) {
        throw ValidationError("num_groups * beams_per_group must be >= k");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (summary_cap == 0) throw ValidationError("summary_cap must be positive");
    if (gaa_max_attempts < 1) throw ValidationError("gaa_max_attempts must be >= 1");
    if (teacher_candidates <= k) throw ValidationError("teacher_candidates must exceed k");
    if (goal_delay_ms < 0 || answer_delay_ms < 0 || http_timeout_ms <= 0) {
        throw ValidationError("delays must be non-negative and http_timeout_ms positive");
    }
    if (port < 0 || port > 65535) throw ValidationError("port out of range");
    if (data_dir.empty()) throw ValidationError("data_dir must not be empty");
    if (ce_backend == "model" && ce_model.empty()) throw ValidationError("ce_backend \"model\" needs ce_model");
}

nlohmann::json config_to_json(const EngineConfig& c) {
    return {{"k", c.k},
            {"dbs",
             {{"num_groups", c.dbs.num_groups},
              {"beams_per_group", c.dbs.beams_per_group},
              {"diversity_weight", c.dbs.diversity_weight},
              {"ngram_order", c.dbs.ngram_order},
              {"max_length", c.dbs.max_length}}},
            {"lambda", c.lambda},
            {"beta", c.beta},
            {"seed", c.seed},
            {"data_dir", c.data_dir},
            {"phrase_corpus", c.phrase_corpus},
            {"summary_cap", c.summary_cap},
            {"persist_matrix", c.persist_matrix},
            {"gaa_max_attempts", c.gaa_max_attempts},
            {"teacher_candidates", c.teacher_candidates},
            {"goal_backend", c.goal_backend},
            {"answer_backend", c.answer_backend},
            {"teacher_backend", c.teacher_backend},
            {"ce_backend", c.ce_backend},
            {"ce_model", c.ce_model},
            {"goal_delay_ms", c.goal_delay_ms},
            {"answer_delay_ms", c.answer_delay_ms},
            {"http_timeout_ms", c.http_timeout_ms},
            {"host", c.host},
            {"port", c.port}};
}

namespace {

EngineConfig from_json_tree(const nlohmann::json& j) {
    EngineConfig c;
    c.k = j.at("k").get<int>();
    const auto& d = j.at("dbs");
    c.dbs.num_groups = d.at("num_groups").get<int>();
    c.dbs.beams_per_group = d.at("beams_per_group").get<int>();
    c.dbs.diversity_weight = d.at("diversity_weight").get<double>();
    c.dbs.ngram_order = d.at("ngram_order").get<int>();
    c.dbs.max_length = d.at("max_length").get<int>();
    c.lambda = j.at("lambda").get<double>();
    c.beta = j.at("beta").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.data_dir = j.at("data_dir").get<std::string>();
    c.phrase_corpus = j.at("phrase_corpus").get<std::string>();
    c.summary_cap = j.at("summary_cap").get<std::size_t>();
    c.persist_matrix = j.at("persist_matrix").get<bool>();
    c.gaa_max_attempts = j.at("gaa_max_attempts").get<int>();
    c.teacher_candidates = j.at("teacher_candidates").get<int>();
    c.goal_backend = j.at("goal_backend").get<std::string>();
    c.answer_backend = j.at("answer_backend").get<std::string>();
    c.teacher_backend = j.at("teacher_backend").get<std::string>();
    c.ce_backend = j.at("ce_backend").get<std::string>();
    c.ce_model = j.at("ce_model").get<std::string>();
    c.goal_delay_ms = j.at("goal_delay_ms").get<int>();
    c.answer_delay_ms = j.at("answer_delay_ms").get<int>();
    c.http_timeout_ms = j.at("http_timeout_ms").get<int>();
    c.host = j.at("host").get<std::string>();
    c.port = j.at("port").get<int>();
    return c;
}

void merge_tree(nlohmann::json& base, const nlohmann::json& patch, const std::string& where) {
    if (!patch.is_object()) throw ParseError("config " + where + " must be an object");
    for (const auto& [key, value] : patch.items()) {
        if (!base.contains(key)) throw ParseError("unknown config key: " + where + key);
        auto& slot = base[key];
        if (slot.is_object()) {
            merge_tree(slot, value, where + key + ".");
        } else if (slot.is_number_unsigned() && value.is_number_integer()) {
            if (value.get<std::int64_t>() < 0) throw ParseError("config key " + where + key + " must be non-negative");
            slot = value;
        } else if ((slot.is_number() && value.is_number()) || slot.type() == value.type()) {
            slot = value;
        } else {
            throw ParseError("config key " + where + key + " has the wrong type");
        }
    }
}

std::string env_name(const std::string& path) {
    std::string out = "PROGUIDE_";
    for (char ch : path) out.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    return out;
}

nlohmann::json parse_env_value(const nlohmann::json& current, const std::string& name, const std::string& raw) {
    try {
        if (current.is_string()) return raw;
        if (current.is_boolean()) {
            if (raw == "1" || raw == "true") return true;
            if (raw == "0" || raw == "false") return false;
            throw ParseError("");
        }
        std::size_t used = 0;
        nlohmann::json out;
        if (current.is_number_unsigned()) {
            if (!raw.empty() && raw.front() == '-') throw ParseError("");
            out = std::stoull(raw, &used);
        } else if (current.is_number_integer()) {
            out = std::stoll(raw, &used);
        } else {
            out = std::stod(raw, &used);
        }
        if (used != raw.size()) throw ParseError("");
        return out;
    } catch (const std::exception&) {
        throw ParseError("environment variable " + name + " has an invalid value: " + raw);
    }
}

void override_leaves(nlohmann::json& node, const std::string& path, const EnvLookup& env) {
    for (auto& [key, value] : node.items()) {
        const std::string child = path.empty() ? key : path + "." + key;
        if (value.is_object()) {
            override_leaves(value, child, env);
            continue;
        }
        const std::string name = env_name(child);
        if (auto raw = env(name)) value = parse_env_value(value, name, *raw);
    }
}

}  // namespace

void merge_config(EngineConfig& config, const nlohmann::json& j) {
    auto tree = config_to_json(config);
    merge_tree(tree, j, "");
    config = from_json_tree(tree);
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

void apply_env_overrides(EngineConfig& config, const EnvLookup& env) {
    auto tree = config_to_json(config);
    override_leaves(tree, "", env);
    config = from_json_tree(tree);
}

EngineConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
    EngineConfig config;
    std::optional<std::filesystem::path> file = path;
    if (!file) {
        if (auto from_env = env("PROGUIDE_CONFIG"); from_env && !from_env->empty()) file = *from_env;
    }
    if (file) merge_config(config, read_json_file(*file));
    apply_env_overrides(config, env);
    config.validate();
    return config;
}

}  // namespace proguide
