#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hailgauge/annotations.hpp"
#include "hailgauge/parser.hpp"

namespace hailgauge {

enum class ScoringPolicy {
    paper_zero,     // a miss is scored as a 0 cm prediction
    exclude_misses, // misses are dropped from the error statistics
};

// Which prediction value enters the statistics.
enum class ValueSource { rounded, raw };

std::string_view to_string(ScoringPolicy p);
std::optional<ScoringPolicy> parse_scoring_policy(std::string_view token);
std::string_view to_string(ValueSource v);
std::optional<ValueSource> parse_value_source(std::string_view token);

struct ScoredPair {
    std::string sample_id;
    double pred = 0.0;
    double truth = 0.0;
    double error = 0.0; // pred - truth; negative means underestimation
};

struct ErrorSet {
    std::vector<ScoredPair> pairs;
    std::size_t evaluated = 0;      // measurements minus provider failures
    std::size_t miss_count = 0;     // no_number / out_of_range misses among `evaluated`
    std::size_t excluded_count = 0; // provider failures
};

using TruthMap = std::map<std::string, double, std::less<>>;

/// Joins measurements to ground truth. Provider failures are excluded under every policy.
/// Throws Error when a measurement has no ground truth.
ErrorSet signed_errors(std::span<const Measurement> measurements, const TruthMap& truths, ScoringPolicy policy,
                       ValueSource source = ValueSource::rounded);

struct ErrorStats {
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double bias = 0.0;
    std::optional<double> pearson_r; // undefined for n < 2 or a constant series
};

/// Single-pass accumulation of MAE, RMSE, bias and Pearson r. Throws Error on empty input.
ErrorStats summarize(std::span<const ScoredPair> pairs);

struct MetricSummary {
    std::string model_id;
    Strategy strategy = Strategy::P1;
    std::string stratum = "all";
    std::size_t n = 0; // evaluated samples in the stratum
    double mae_cm = 0.0;
    double rmse_cm = 0.0;
    double bias_cm = 0.0;
    std::optional<double> pearson_r;
    std::size_t miss_count = 0;
    std::size_t excluded_count = 0;
    bool not_generalizable = false; // single-sample stratum
};

/// Summary for one (model, strategy, stratum) cell; nullopt when no pair survives the policy.
std::optional<MetricSummary> build_summary(const std::string& model_id, Strategy strategy, std::string stratum,
                                           const ErrorSet& errors);

/// One "all" summary per (model, strategy) group, ordered by model then strategy.
std::vector<MetricSummary> evaluate_groups(std::span<const Measurement> measurements, const TruthMap& truths,
                                           ScoringPolicy policy, ValueSource source = ValueSource::rounded);

enum class StratifyKey { reference_manual, reference_model_step1, distance };

std::string_view to_string(StratifyKey k);

// Stratum label for a sample; nullopt lands in the "unannotated" stratum.
using StratumOf = std::function<std::optional<std::string>(const std::string& sample_id)>;

StratumOf manual_reference_strata(const AnnotationView& annotations);
StratumOf distance_strata(const AnnotationView& annotations);
StratumOf step1_strata(std::map<std::string, ReferenceClass> step1_classes);

/// Per-stratum summaries for one (model, strategy) group, ordered by stratum label.
std::vector<MetricSummary> stratify(std::span<const Measurement> group, const TruthMap& truths,
                                    ScoringPolicy policy, ValueSource source, const StratumOf& stratum_of);

struct MissBar {
    std::string model_id;
    Strategy strategy = Strategy::P1;
    std::size_t close_up = 0;
    std::size_t distant = 0;
    std::size_t unannotated = 0;

    std::size_t total() const { return close_up + distant + unannotated; }
};

/// Miss counts per (model, strategy), split by distance class. Every group gets a bar.
std::vector<MissBar> miss_histogram(std::span<const Measurement> measurements, const AnnotationView& annotations);

inline constexpr std::string_view kMetricsCsvHeader = "model,strategy,stratum,n,mae_cm,rmse_cm,bias_cm,pearson_r,miss";

std::string metrics_csv(std::span<const MetricSummary> rows);
std::vector<MetricSummary> parse_metrics_csv(std::string_view text);

} // namespace hailgauge
