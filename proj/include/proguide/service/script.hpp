#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proguide/service/engine.hpp"

namespace proguide {

// Scripted session driver. One JSON object per line:
//   {"op": "session"}                 start a session (the current one)
//   {"op": "turn", "query": text}     free-typed query
//   {"op": "click", "index": i}       click guidance i (0-based) of the latest turn
//   {"op": "follow"}                  next turn whose query is the clicked phrase
using ScriptOp = nlohmann::json;

std::vector<ScriptOp> load_script(const std::filesystem::path& path);

class ScriptRunner {
public:
    // Continues with the most recently created session of `engine`, if any.
    explicit ScriptRunner(Engine& engine);

    void apply(const ScriptOp& op);
    // Applies ops[begin, end).
    void run(const std::vector<ScriptOp>& ops, std::size_t begin, std::size_t end);
    void run(const std::vector<ScriptOp>& ops) { run(ops, 0, ops.size()); }

    const std::string& session_id() const { return session_; }

private:
    Engine& engine_;
    std::string session_;
};

// Position just past the op that produces the n-th turn (ops.size() when the
// script has fewer turns).
std::size_t position_after_turn(const std::vector<ScriptOp>& ops, std::size_t n);

}  // namespace proguide
