#include "proguide/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace proguide {

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> rank(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double ctr(const std::vector<ClickEvent>& clicks, std::size_t turns) {
    if (turns == 0) throw ValidationError("CTR is undefined for zero turns");
    std::set<std::pair<std::string, int>> clicked;
    for (const auto& c : clicks) clicked.emplace(c.session_id, c.turn_index);
    if (clicked.size() > turns) throw ValidationError("more clicked turns than turns");
    return static_cast<double>(clicked.size()) / static_cast<double>(turns);
}

double delta_gsb(const GsbCounts& counts) {
    if (counts.good < 0 || counts.same < 0 || counts.bad < 0) throw ValidationError("GSB counts must be non-negative");
    const long total = counts.good + counts.same + counts.bad;
    if (total == 0) throw ValidationError("GSB total is zero");
    return static_cast<double>(counts.good - counts.bad) / static_cast<double>(total);
}

double accuracy(const std::vector<AnnotationRecord>& annotations) {
    if (annotations.empty()) throw ValidationError("accuracy needs at least one annotation");
    const auto passing = std::count_if(annotations.begin(), annotations.end(),
                                       [](const AnnotationRecord& a) { return a.meets_offline_criteria(); });
    return static_cast<double>(passing) / static_cast<double>(annotations.size());
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("spearman: series differ in length");
    if (xs.size() < 2) throw ValidationError("spearman needs at least two points");
    auto rx = average_ranks(xs);
    auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman is undefined for a constant series");
    return sxy / std::sqrt(sxx * syy);
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::gaa: return "gaa";
        case Stage::answer: return "answer";
        case Stage::decode: return "decode";
        case Stage::ce: return "ce";
        case Stage::total: return "total";
    }
    return "total";
}

Stage stage_from_string(const std::string& text) {
    for (Stage s : {Stage::gaa, Stage::answer, Stage::decode, Stage::ce, Stage::total}) {
        if (to_string(s) == text) return s;
    }
    throw ParseError("unknown latency stage: " + text);
}

double nearest_rank(std::vector<double> values, double percentile) {
    if (values.empty()) throw ValidationError("percentile of an empty series");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

std::map<Stage, StageLatency> latency_report(const std::vector<LatencySample>& samples) {
    std::map<Stage, std::vector<double>> by_stage;
    for (const auto& s : samples) {
        if (!(s.duration_ms >= 0.0)) throw ValidationError("latency duration must be >= 0");
        by_stage[s.stage].push_back(s.duration_ms);
    }
    std::map<Stage, StageLatency> report;
    for (const auto& [stage, values] : by_stage) {
        StageLatency l;
        l.count = values.size();
        l.p50 = nearest_rank(values, 50);
        l.p90 = nearest_rank(values, 90);
        l.p99 = nearest_rank(values, 99);
        double total = 0.0;
        for (double v : values) total += v;
        l.mean = total / static_cast<double>(values.size());
        l.max = *std::max_element(values.begin(), values.end());
        report[stage] = l;
    }
    return report;
}

nlohmann::json latency_report_json(const std::map<Stage, StageLatency>& report) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [stage, l] : report) {
        j[to_string(stage)] = {{"count", l.count}, {"p50_ms", l.p50}, {"p90_ms", l.p90},
                               {"p99_ms", l.p99},  {"mean_ms", l.mean}, {"max_ms", l.max}};
    }
    return j;
}

std::string latency_report_table(const std::map<Stage, StageLatency>& report) {
    std::string out = fmt::format("{:<8} {:>6} {:>10} {:>10} {:>10} {:>10}\n", "stage", "n", "p50_ms", "p90_ms",
                                  "p99_ms", "mean_ms");
    for (const auto& [stage, l] : report) {
        out += fmt::format("{:<8} {:>6} {:>10.3f} {:>10.3f} {:>10.3f} {:>10.3f}\n", to_string(stage), l.count, l.p50,
                           l.p90, l.p99, l.mean);
    }
    return out;
}

void to_json(nlohmann::json& j, const GsbCounts& counts) {
    j = nlohmann::json{{"good", counts.good}, {"same", counts.same}, {"bad", counts.bad}};
}

void from_json(const nlohmann::json& j, GsbCounts& counts) {
    counts.good = j.at("good").get<long>();
    counts.same = j.at("same").get<long>();
    counts.bad = j.at("bad").get<long>();
}

}  // namespace proguide
