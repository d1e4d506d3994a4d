#include "proguide/core/json_io.hpp"

#include <fstream>
#include <sstream>

namespace proguide {

void to_json(json& j, const GuidancePhrase& phrase) {
    j = json{{"text", phrase.text},
             {"ce_score", phrase.ce_score ? json(*phrase.ce_score) : json(nullptr)},
             {"origin", to_string(phrase.origin)}};
}

void from_json(const json& j, GuidancePhrase& phrase) {
    phrase.text = j.at("text").get<std::string>();
    phrase.ce_score.reset();
    if (j.contains("ce_score") && !j.at("ce_score").is_null()) phrase.ce_score = j.at("ce_score").get<double>();
    phrase.origin = j.contains("origin") ? phrase_origin_from_string(j.at("origin").get<std::string>())
                                         : PhraseOrigin::decoded;
}

void to_json(json& j, const ContextBundle& context) {
    j = json{{"explicit_goal", context.explicit_goal},
             {"summary", context.summary},
             {"shift_detected", context.shift_detected}};
}

void from_json(const json& j, ContextBundle& context) {
    context.explicit_goal = j.at("explicit_goal").get<std::string>();
    context.summary = j.at("summary").get<std::string>();
    context.shift_detected = j.at("shift_detected").get<bool>();
}

void to_json(json& j, const Turn& turn) {
    j = json{{"index", turn.index},
             {"query", turn.query},
             {"answer", turn.answer},
             {"context", turn.context},
             {"guidance", turn.guidance},
             {"clicked_index", turn.clicked_index ? json(*turn.clicked_index) : json(nullptr)}};
}

void from_json(const json& j, Turn& turn) {
    turn.index = j.at("index").get<int>();
    turn.query = j.at("query").get<std::string>();
    turn.answer = j.at("answer").get<std::string>();
    turn.context = j.at("context").get<ContextBundle>();
    turn.guidance = j.at("guidance").get<std::vector<GuidancePhrase>>();
    turn.clicked_index.reset();
    if (j.contains("clicked_index") && !j.at("clicked_index").is_null()) {
        turn.clicked_index = j.at("clicked_index").get<int>();
    }
}

void to_json(json& j, const Session& session) {
    j = json{{"id", session.id}, {"turns", session.turns}, {"current_summary", session.current_summary}};
}

void from_json(const json& j, Session& session) {
    session.id = j.at("id").get<std::string>();
    session.turns = j.at("turns").get<std::vector<Turn>>();
    session.current_summary = j.at("current_summary").get<std::string>();
}

void to_json(json& j, const ClickEvent& click) {
    j = json{{"session_id", click.session_id},
             {"turn_index", click.turn_index},
             {"guidance_index", click.guidance_index},
             {"timestamp", click.timestamp_ms}};
}

void from_json(const json& j, ClickEvent& click) {
    click.session_id = j.at("session_id").get<std::string>();
    click.turn_index = j.at("turn_index").get<int>();
    click.guidance_index = j.at("guidance_index").get<int>();
    click.timestamp_ms = j.at("timestamp").get<std::int64_t>();
}

void to_json(json& j, const PreferenceRecord& record) {
    j = json{{"input", record.input},
             {"chosen", record.chosen},
             {"rejected", record.rejected},
             {"arity", to_string(record.arity)}};
}

void from_json(const json& j, PreferenceRecord& record) {
    record.input = j.at("input").get<std::string>();
    record.chosen = j.at("chosen").get<std::string>();
    record.rejected = j.at("rejected").get<std::string>();
    record.arity = pair_arity_from_string(j.at("arity").get<std::string>());
}

void to_json(json& j, const AnnotationRecord& record) {
    j = json{{"session_id", record.session_id},     {"turn_index", record.turn_index},
             {"relevance", record.relevance},       {"applicability", record.applicability},
             {"diversity", record.diversity},       {"redline_violation", record.redline_violation}};
}

void from_json(const json& j, AnnotationRecord& record) {
    record.session_id = j.at("session_id").get<std::string>();
    record.turn_index = j.at("turn_index").get<int>();
    record.relevance = j.at("relevance").get<bool>();
    record.applicability = j.at("applicability").get<bool>();
    record.diversity = j.at("diversity").get<bool>();
    record.redline_violation = j.at("redline_violation").get<bool>();
}

std::string to_jsonl_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&)>& on_line) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            on_line(j);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

json read_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

}  // namespace proguide
