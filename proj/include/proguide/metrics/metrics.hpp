#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proguide/core/types.hpp"

namespace proguide {

// Fraction of turns with a click. Clicks are counted once per
// (session, turn); throws ValidationError when turns == 0 or the clicks
// cover more distinct turns than exist.
double ctr(const std::vector<ClickEvent>& clicks, std::size_t turns);

struct GsbCounts {
    long good = 0;
    long same = 0;
    long bad = 0;
};

// (good - bad) / (good + same + bad); throws ValidationError on negative
// counts or a zero total.
double delta_gsb(const GsbCounts& counts);

// Fraction of records meeting all offline criteria; throws on empty input.
double accuracy(const std::vector<AnnotationRecord>& annotations);

// Rank correlation with average ranks for ties. Throws ValidationError on
// length mismatch, fewer than 2 points or a constant series.
double spearman(std::span<const double> xs, std::span<const double> ys);

enum class Stage { gaa, answer, decode, ce, total };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& text);

struct LatencySample {
    Stage stage = Stage::total;
    double duration_ms = 0.0;
};

struct StageLatency {
    std::size_t count = 0;
    double p50 = 0.0;
    double p90 = 0.0;
    double p99 = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
double nearest_rank(std::vector<double> values, double percentile);

// Per-stage summary; stages without samples are left out. Throws
// ValidationError on a negative duration.
std::map<Stage, StageLatency> latency_report(const std::vector<LatencySample>& samples);

nlohmann::json latency_report_json(const std::map<Stage, StageLatency>& report);
// Aligned plain-text table, one stage per line.
std::string latency_report_table(const std::map<Stage, StageLatency>& report);

void to_json(nlohmann::json& j, const GsbCounts& counts);
void from_json(const nlohmann::json& j, GsbCounts& counts);

}  // namespace proguide
