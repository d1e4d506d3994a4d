#include "proguide/service/script.hpp"

#include "proguide/core/json_io.hpp"

namespace proguide {

std::vector<ScriptOp> load_script(const std::filesystem::path& path) {
    std::vector<ScriptOp> ops;
    for_each_jsonl(path, [&](const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("op") || !j.at("op").is_string()) {
            throw ParseError(path.string() + ": script line lacks an \"op\"");
        }
        ops.push_back(j);
    });
    return ops;
}

ScriptRunner::ScriptRunner(Engine& engine) : engine_(engine) {
    auto ids = engine.session_ids();
    if (!ids.empty()) session_ = ids.back();
}

void ScriptRunner::apply(const ScriptOp& op) {
    const auto name = op.at("op").get<std::string>();
    if (name == "session") {
        session_ = engine_.create_session();
        return;
    }
    if (session_.empty()) throw ValidationError("script op \"" + name + "\" before any session");
    const Session s = engine_.session(session_);
    if (name == "turn") {
        engine_.handle_turn(session_, op.at("query").get<std::string>());
    } else if (name == "click") {
        if (s.turns.empty()) throw ValidationError("script click before any turn");
        engine_.record_click(session_, s.turns.back().index, op.at("index").get<int>());
    } else if (name == "follow") {
        if (s.turns.empty() || !s.turns.back().clicked_index) {
            throw ValidationError("script follow needs a clicked latest turn");
        }
        const auto& last = s.turns.back();
        engine_.handle_turn(session_, last.guidance[static_cast<std::size_t>(*last.clicked_index)].text);
    } else {
        throw ValidationError("unknown script op: " + name);
    }
}

void ScriptRunner::run(const std::vector<ScriptOp>& ops, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end && i < ops.size(); ++i) apply(ops[i]);
}

std::size_t position_after_turn(const std::vector<ScriptOp>& ops, std::size_t n) {
    std::size_t turns = 0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const auto name = ops[i].at("op").get<std::string>();
        if (name == "turn" || name == "follow") {
            if (++turns == n) return i + 1;
        }
    }
    return ops.size();
}

}  // namespace proguide
