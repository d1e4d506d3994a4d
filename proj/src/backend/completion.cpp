#include "proguide/backend/completion.hpp"

#include "proguide/core/json_io.hpp"
#include "proguide/core/text.hpp"

namespace proguide {

std::string prompt_key(const std::string& prompt) { return to_hex(fnv1a64(prompt)); }

FileCompletionBackend::FileCompletionBackend(const std::filesystem::path& path) {
    for_each_jsonl(path, [&](const json& j) {
        by_key_[j.at("prompt_hash").get<std::string>()] = j.at("completion").get<std::string>();
    });
}

FileCompletionBackend::FileCompletionBackend(std::map<std::string, std::string> by_key)
    : by_key_(std::move(by_key)) {}

std::string FileCompletionBackend::complete(const std::string& prompt) {
    if (auto it = by_key_.find(prompt_key(prompt)); it != by_key_.end()) return it->second;
    if (auto it = by_key_.find("*"); it != by_key_.end()) return it->second;
    throw BackendError("no canned completion for prompt " + prompt_key(prompt));
}

}  // namespace proguide
