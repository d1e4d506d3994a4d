#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "proguide/core/json_io.hpp"
#include "proguide/decode/dbs.hpp"
#include "proguide/decode/phrase_model.hpp"
#include "proguide/decode/token_scorer.hpp"
#include "proguide/metrics/metrics.hpp"
#include "proguide/rank/click_estimator.hpp"
#include "proguide/service/distill.hpp"
#include "proguide/service/engine.hpp"
#include "proguide/service/http_service.hpp"
#include "proguide/service/script.hpp"

using namespace proguide;

namespace {

HttpService* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
    } else {
        write_text_file(path, content);
    }
}

EngineConfig config_from(const std::string& path) {
    return load_config(path.empty() ? std::nullopt : std::optional<std::filesystem::path>(path));
}

int run_serve(const std::string& config_path, bool logical_clock) {
    auto config = config_from(config_path);
    spdlog::info("effective config: {}", config_to_json(config).dump());
    auto backends = make_backends(config, logical_clock);
    EventLog log(config.event_log_path());
    if (log.torn_bytes_dropped() > 0) spdlog::warn("dropped {} bytes of a torn event record", log.torn_bytes_dropped());
    Engine engine(config, deps_of(backends), log);
    HttpService service(engine);
    if (!service.bind(config.host, config.port)) {
        spdlog::error("cannot bind {}:{}", config.host, config.port);
        return 1;
    }
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    spdlog::info("listening on http://{}:{}", config.host, config.port);
    service.serve();
    g_service = nullptr;
    return 0;
}

struct DecodeArgs {
    std::string table;
    std::string phrases;
    std::string prompt;
    DbsConfig dbs{1, 4, 0.5, 2, 4};
    bool beam_search = false;
};

int run_decode(const DecodeArgs& a) {
    if (a.table.empty() == a.phrases.empty()) throw ValidationError("give exactly one of --table and --phrases");
    nlohmann::json out;
    auto emit = [&](const TokenScorer& scorer, const TokenSeq& prompt) {
        if (a.beam_search) {
            out = beam_search(scorer, prompt, a.dbs.beams_per_group, a.dbs.max_length);
        } else {
            out = dbs_decode(scorer, prompt, a.dbs);
        }
    };
    if (!a.table.empty()) {
        auto scorer = NgramTableScorer::load(a.table);
        emit(scorer, a.prompt.empty() ? TokenSeq{} : scorer.encode(a.prompt));
    } else {
        auto scorer = PhraseModelScorer::load(a.phrases);
        emit(scorer, scorer.encode_prompt(a.prompt));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_train_ce(const std::string& data, const std::string& out_path, const CeHyperparams& hyper) {
    auto examples = read_jsonl<CeExample>(data);
    auto model = train_ce(examples, hyper);
    save_model(model, out_path);
    nlohmann::json report = {{"train_size", model.train_size},
                             {"validation_size", model.validation_size},
                             {"train_losses", model.train_losses},
                             {"validation_losses", model.validation_losses}};
    if (model.validation_auc) report["validation_auc"] = *model.validation_auc;
    std::cout << report.dump(2) << "\n";
    return 0;
}

int run_build_pairs(const std::string& config_path, const std::string& data_dir, const std::string& format,
                    const std::string& out_path) {
    auto config = config_from(config_path);
    if (!data_dir.empty()) config.data_dir = data_dir;
    auto backends = make_backends(config, true);
    EventLog log(config.event_log_path());
    Engine engine(config, deps_of(backends), log);
    auto result = engine.export_preferences(pair_arity_from_string(format));
    write_output(out_path, result.jsonl);
    std::cerr << summary_to_json(result.summary).dump() << "\n";
    return 0;
}

int run_eval(const std::string& gsb, const std::string& annotations, const std::string& events) {
    if (gsb.empty() && annotations.empty() && events.empty()) {
        throw ValidationError("give at least one of --gsb, --annotations, --events");
    }
    if (!gsb.empty()) std::cout << fmt::format("delta_gsb {:.3f}\n", delta_gsb(read_json_file(gsb).get<GsbCounts>()));
    if (!annotations.empty()) {
        std::cout << fmt::format("accuracy {:.3f}\n", accuracy(read_jsonl<AnnotationRecord>(annotations)));
    }
    if (!events.empty()) {
        std::size_t turns = 0;
        std::vector<ClickEvent> clicks;
        for (const auto& r : read_event_log(events)) {
            if (r.kind == EventKind::turn) ++turns;
            if (r.kind == EventKind::click) clicks.push_back(r.payload.get<ClickEvent>());
        }
        std::cout << fmt::format("turns {}\nclicks {}\nctr {:.3f}\n", turns, clicks.size(), ctr(clicks, turns));
    }
    return 0;
}

struct ReplayArgs {
    std::string config;
    std::string script;
    std::string data_dir;
    std::string one_pair;
    std::string k_pair;
    std::size_t stop_after_turn = 0;
};

int run_replay(const ReplayArgs& a) {
    auto config = config_from(a.config);
    if (!a.data_dir.empty()) config.data_dir = a.data_dir;
    auto backends = make_backends(config, true);
    EventLog log(config.event_log_path());
    Engine engine(config, deps_of(backends), log);
    const auto ops = load_script(a.script);
    ScriptRunner runner(engine);
    const std::size_t end = a.stop_after_turn > 0 ? position_after_turn(ops, a.stop_after_turn) : ops.size();
    runner.run(ops, 0, end);
    if (a.stop_after_turn == 0) {
        if (!a.one_pair.empty()) write_output(a.one_pair, engine.export_preferences(PairArity::one_pair).jsonl);
        if (!a.k_pair.empty()) write_output(a.k_pair, engine.export_preferences(PairArity::k_pair).jsonl);
    }
    std::cerr << fmt::format("{} events, {} sessions\n", log.size(), engine.session_ids().size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proactive guidance engine"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    std::string config_path;
    bool logical_clock = false;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--config", config_path, "Config file (else $PROGUIDE_CONFIG)");
    serve->add_flag("--logical-clock", logical_clock, "Deterministic timestamps");

    DecodeArgs decode_args;
    auto* decode = app.add_subcommand("decode", "One-shot diverse beam search");
    decode->add_option("--table", decode_args.table, "n-gram table fixture");
    decode->add_option("--phrases", decode_args.phrases, "Phrase corpus for the phrase model");
    decode->add_option("--prompt", decode_args.prompt, "Prompt text");
    decode->add_option("--groups", decode_args.dbs.num_groups)->capture_default_str();
    decode->add_option("--beams", decode_args.dbs.beams_per_group)->capture_default_str();
    decode->add_option("--weight", decode_args.dbs.diversity_weight)->capture_default_str();
    decode->add_option("--ngram", decode_args.dbs.ngram_order)->capture_default_str();
    decode->add_option("--max-length", decode_args.dbs.max_length)->capture_default_str();
    decode->add_flag("--beam-search", decode_args.beam_search, "Plain beam search of width --beams");

    std::string ce_data, ce_out;
    CeHyperparams hyper;
    auto* train = app.add_subcommand("train-ce", "Train the click estimator");
    train->add_option("--data", ce_data, "JSONL of {query, guidance, label}")->required();
    train->add_option("--out", ce_out, "Model file")->required();
    train->add_option("--lr", hyper.learning_rate)->capture_default_str();
    train->add_option("--epochs", hyper.epochs)->capture_default_str();
    train->add_option("--seed", hyper.seed)->capture_default_str();
    train->add_option("--validation-fraction", hyper.validation_fraction)->capture_default_str();

    std::string pairs_data_dir, pairs_format = "k-pair", pairs_out;
    auto* pairs = app.add_subcommand("build-pairs", "Export preference pairs from the event log");
    pairs->add_option("--config", config_path);
    pairs->add_option("--data-dir", pairs_data_dir, "Overrides data_dir");
    pairs->add_option("--format", pairs_format)->check(CLI::IsMember({"one-pair", "k-pair"}))->capture_default_str();
    pairs->add_option("--out", pairs_out, "Output file (default stdout)");

    auto* distill = app.add_subcommand("distill", "Teacher distillation jobs");
    distill->require_subcommand(1);
    std::string d_input, d_teacher, d_out, d_candidates, d_selection;
    std::size_t d_n = 5, d_k = kDefaultGuidanceCount;
    auto* generate = distill->add_subcommand("generate", "Collect teacher candidates");
    generate->add_option("--input", d_input, "JSONL of {id, query, answer, context}")->required();
    generate->add_option("--teacher", d_teacher, "Teacher URL or canned-completion JSONL")->required();
    generate->add_option("--n", d_n)->capture_default_str();
    generate->add_option("--k", d_k)->capture_default_str();
    generate->add_option("--out", d_out)->required();
    auto* sft = distill->add_subcommand("export", "Write SFT records for the selected candidates");
    sft->add_option("--candidates", d_candidates)->required();
    sft->add_option("--selection", d_selection, "JSONL of {id, keep: [1-based positions]}")->required();
    sft->add_option("--k", d_k)->capture_default_str();
    sft->add_option("--out", d_out, "Output file (default stdout)");

    std::string gsb, annotations, events;
    auto* eval = app.add_subcommand("eval", "Offline metrics");
    eval->add_option("--gsb", gsb, "{good, same, bad} JSON");
    eval->add_option("--annotations", annotations, "JSONL of annotation records");
    eval->add_option("--events", events, "Event log for CTR");

    ReplayArgs replay_args;
    auto* replay = app.add_subcommand("replay", "Drive a scripted session");
    replay->add_option("--config", replay_args.config);
    replay->add_option("--script", replay_args.script)->required();
    replay->add_option("--data-dir", replay_args.data_dir, "Overrides data_dir");
    replay->add_option("--one-pair", replay_args.one_pair, "Write the 1-pair export here");
    replay->add_option("--k-pair", replay_args.k_pair, "Write the k-pair export here");
    replay->add_option("--stop-after-turn", replay_args.stop_after_turn, "Stop after this many turns");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("proguide"));
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*serve) return run_serve(config_path, logical_clock);
        if (*decode) return run_decode(decode_args);
        if (*train) return run_train_ce(ce_data, ce_out, hyper);
        if (*pairs) return run_build_pairs(config_path, pairs_data_dir, pairs_format, pairs_out);
        if (*generate) {
            std::unique_ptr<CompletionBackend> teacher;
            if (is_http_url(d_teacher)) {
                teacher = std::make_unique<HttpCompletionBackend>(d_teacher, std::chrono::seconds(60));
            } else {
                teacher = std::make_unique<FileCompletionBackend>(d_teacher);
            }
            auto records = generate_distillation_set(read_jsonl<DistillInput>(d_input), *teacher, d_n, d_k);
            write_jsonl(d_out, records);
            std::size_t flagged = 0;
            for (const auto& r : records) flagged += r.flagged ? 1 : 0;
            std::cerr << fmt::format("{} records, {} flagged\n", records.size(), flagged);
            return 0;
        }
        if (*sft) {
            auto result = export_sft(read_jsonl<DistillCandidate>(d_candidates), read_jsonl<DistillSelection>(d_selection),
                                     d_k);
            std::string content;
            for (const auto& s : result.samples) content += serialize_sft(s, d_k) + "\n";
            write_output(d_out, content);
            for (const auto& [id, reason] : result.rejected) std::cerr << fmt::format("rejected {}: {}\n", id, reason);
            return 0;
        }
        if (*eval) return run_eval(gsb, annotations, events);
        if (*replay) return run_replay(replay_args);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
