#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hailgauge/annotations.hpp"
#include "hailgauge/dataset.hpp"
#include "hailgauge/metrics.hpp"
#include "hailgauge/orchestrator.hpp"

namespace hailgauge {

struct StratumRow {
    StratifyKey key = StratifyKey::reference_manual;
    MetricSummary summary;
};

/// Every number a report shows, computed once from a run log and the annotations.
struct RunAnalysis {
    std::string run_id;
    std::string config_hash;
    ScoringPolicy policy = ScoringPolicy::paper_zero;
    ValueSource source = ValueSource::rounded;
    std::size_t cells = 0;
    std::size_t failed_cells = 0;
    bool interrupted = false;

    std::vector<Measurement> measurements;
    TruthMap truths;
    std::vector<MetricSummary> overall; // table order, see sort_metric_rows
    std::vector<StratumRow> references; // manual-annotation strata for every group, step-1 strata for P2 groups
    std::vector<StratumRow> distances;
    std::vector<MissBar> misses;
    std::optional<DatasetStats> dataset; // absent when the run's dataset file is gone
};

RunAnalysis analyze_run(const RunRecord& run, const AnnotationView& annotations,
                        std::optional<ScoringPolicy> policy_override = std::nullopt);

/// Ascending MAE, ties broken by RMSE, then model id, then strategy.
void sort_metric_rows(std::vector<MetricSummary>& rows);

/// Markdown table with the best value per column in bold: lowest MAE and RMSE, bias closest to
/// zero, highest r, fewest misses. Values are printed exactly as in metrics.csv.
std::string format_metrics_table(std::span<const MetricSummary> rows, bool show_stratum = false);

inline constexpr std::string_view kRefObjCsvHeader =
    "stratified_by,model,strategy,stratum,n,mae_cm,rmse_cm,bias_cm,pearson_r,miss,not_generalizable";
std::string refobj_csv(std::span<const StratumRow> rows);

struct ChartLabel {
    std::string run_id;
    ScoringPolicy policy = ScoringPolicy::paper_zero;
};

/// Ground-truth histogram in 0.5 cm bins, stacked by distance class.
std::string histogram_svg(const DatasetStats& stats, const ChartLabel& label);
/// One stacked bar per (model, strategy), split by distance class; zero bars are still drawn.
std::string miss_chart_svg(std::span<const MissBar> bars, const ChartLabel& label);

struct ScatterPoint {
    std::string sample_id;
    double truth = 0.0;
    double pred = 0.0;
    bool miss = false;
};

/// Points for one (model, strategy). Misses sit at 0 under paper_zero and are left out under
/// exclude_misses; provider failures are never plotted. Throws Error for an unknown or empty pair.
std::vector<ScatterPoint> scatter_points(const RunAnalysis& analysis, const std::string& model_id,
                                         Strategy strategy);
std::string scatter_svg(const RunAnalysis& analysis, const std::string& model_id, Strategy strategy);

/// MAE per reference stratum for one group; single-sample strata carry a footnote marker.
std::string reference_bar_svg(std::span<const StratumRow> rows, const std::string& title, const ChartLabel& label);

/// Rows and title fig_refbar.svg is drawn from: the best-ranked P2 group (or the best group when
/// the run has no P2), stratified by manual annotation when any exist, otherwise by step-1 class.
std::pair<std::vector<StratumRow>, std::string> reference_bar_rows(const RunAnalysis& analysis);

std::string report_markdown(const RunAnalysis& analysis);

struct ReportBundle {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
};

/// Writes metrics.csv, refobj.csv, the SVG figures and report.md into `out_root/<run_id>/`.
ReportBundle write_report(const RunAnalysis& analysis, const std::filesystem::path& out_root);

} // namespace hailgauge
