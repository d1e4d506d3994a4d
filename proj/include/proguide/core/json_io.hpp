#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proguide/core/types.hpp"

namespace proguide {

using json = nlohmann::json;

void to_json(json& j, const GuidancePhrase& phrase);
void from_json(const json& j, GuidancePhrase& phrase);
void to_json(json& j, const ContextBundle& context);
void from_json(const json& j, ContextBundle& context);
void to_json(json& j, const Turn& turn);
void from_json(const json& j, Turn& turn);
void to_json(json& j, const Session& session);
void from_json(const json& j, Session& session);
void to_json(json& j, const ClickEvent& click);
void from_json(const json& j, ClickEvent& click);
void to_json(json& j, const PreferenceRecord& record);
void from_json(const json& j, PreferenceRecord& record);
void to_json(json& j, const AnnotationRecord& record);
void from_json(const json& j, AnnotationRecord& record);

// Compact single-line dump; JSONL lines never contain raw newlines.
std::string to_jsonl_line(const json& j);

// Calls `on_line` for every non-blank line. Throws ParseError naming the
// line number when a line is not valid JSON.
void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&)>& on_line);

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    std::vector<T> out;
    for_each_jsonl(path, [&](const json& j) { out.push_back(j.get<T>()); });
    return out;
}

json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
    std::string content;
    for (const auto& item : items) {
        content += to_jsonl_line(json(item));
        content += '\n';
    }
    write_text_file(path, content);
}

}  // namespace proguide
