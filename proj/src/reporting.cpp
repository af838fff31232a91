#include "hailgauge/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace hailgauge {

namespace fs = std::filesystem;

void sort_metric_rows(std::vector<MetricSummary>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const MetricSummary& a, const MetricSummary& b) {
        return std::tie(a.mae_cm, a.rmse_cm, a.model_id, a.strategy) <
               std::tie(b.mae_cm, b.rmse_cm, b.model_id, b.strategy);
    });
}

RunAnalysis analyze_run(const RunRecord& run, const AnnotationView& annotations,
                        std::optional<ScoringPolicy> policy_override) {
    RunAnalysis a;
    a.run_id = run.run_id;
    a.config_hash = run.config_hash;
    a.policy = policy_override.value_or(run.scoring);
    a.source = run.value_source;
    a.cells = run.cells.size();
    a.failed_cells = run.failed_cells;
    a.interrupted = run.interrupted;
    a.measurements = run.measurements();
    a.truths = run.truths();

    a.overall = evaluate_groups(a.measurements, a.truths, a.policy, a.source);
    sort_metric_rows(a.overall);

    std::map<std::pair<std::string, Strategy>, std::vector<Measurement>> groups;
    std::map<std::pair<std::string, Strategy>, std::map<std::string, ReferenceClass>> step1;
    for (const auto& c : run.cells) {
        groups[{c.model_id, c.strategy}].push_back(c.measurement);
        if (c.trace.has_step1())
            step1[{c.model_id, c.strategy}][c.sample_id] =
                c.trace.step1_reference.value_or(ReferenceClass::unspecified_or_other);
    }

    auto add = [](std::vector<StratumRow>& out, StratifyKey key, std::vector<MetricSummary> rows) {
        for (auto& r : rows)
            out.push_back({key, std::move(r)});
    };
    for (const auto& [key, group] : groups) {
        if (!annotations.empty()) {
            add(a.references, StratifyKey::reference_manual,
                stratify(group, a.truths, a.policy, a.source, manual_reference_strata(annotations)));
            add(a.distances, StratifyKey::distance,
                stratify(group, a.truths, a.policy, a.source, distance_strata(annotations)));
        }
        if (key.second == Strategy::P2 && step1.contains(key))
            add(a.references, StratifyKey::reference_model_step1,
                stratify(group, a.truths, a.policy, a.source, step1_strata(step1.at(key))));
    }
    std::stable_sort(a.references.begin(), a.references.end(), [](const StratumRow& x, const StratumRow& y) {
        return x.key < y.key;
    });

    a.misses = miss_histogram(a.measurements, annotations);

    if (!run.dataset_path.empty() && fs::is_regular_file(run.dataset_path)) {
        auto samples = read_samples_jsonl(run.dataset_path);
        if (!samples.empty()) {
            a.dataset = compute_stats(samples, [&annotations](const std::string& id) -> std::optional<DistanceClass> {
                auto it = annotations.find(id);
                if (it == annotations.end())
                    return std::nullopt;
                return it->second.distance;
            });
        }
    }
    return a;
}

namespace {

std::string r_text(const std::optional<double>& r) {
    return r ? format_double(*r) : std::string("NA");
}

std::string bold_if(bool on, const std::string& s) {
    return on ? "**" + s + "**" : s;
}

} // namespace

std::string format_metrics_table(std::span<const MetricSummary> rows, bool show_stratum) {
    if (rows.empty())
        return "_no rows_\n";
    double best_mae = rows[0].mae_cm, best_rmse = rows[0].rmse_cm, best_bias = std::abs(rows[0].bias_cm);
    std::size_t best_miss = rows[0].miss_count;
    std::optional<double> best_r;
    for (const auto& r : rows) {
        best_mae = std::min(best_mae, r.mae_cm);
        best_rmse = std::min(best_rmse, r.rmse_cm);
        best_bias = std::min(best_bias, std::abs(r.bias_cm));
        best_miss = std::min(best_miss, r.miss_count);
        if (r.pearson_r && (!best_r || *r.pearson_r > *best_r))
            best_r = r.pearson_r;
    }

    std::string out = show_stratum ? "| Model | Prompt | Stratum | n | MAE (cm) | RMSE (cm) | Bias (cm) | r | Miss | Note |\n"
                                     "|---|---|---|---:|---:|---:|---:|---:|---:|---|\n"
                                   : "| Model | Prompt | n | MAE (cm) | RMSE (cm) | Bias (cm) | r | Miss |\n"
                                     "|---|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& r : rows) {
        out += "| " + r.model_id + " | " + std::string(to_string(r.strategy)) + " | ";
        if (show_stratum)
            out += r.stratum + " | ";
        out += std::to_string(r.n) + " | ";
        out += bold_if(r.mae_cm == best_mae, format_double(r.mae_cm)) + " | ";
        out += bold_if(r.rmse_cm == best_rmse, format_double(r.rmse_cm)) + " | ";
        out += bold_if(std::abs(r.bias_cm) == best_bias, format_double(r.bias_cm)) + " | ";
        out += bold_if(r.pearson_r && best_r && *r.pearson_r == *best_r, r_text(r.pearson_r)) + " | ";
        out += bold_if(r.miss_count == best_miss, std::to_string(r.miss_count)) + " |";
        if (show_stratum)
            out += r.not_generalizable ? " single sample; not generalizable |" : " |";
        out += '\n';
    }
    return out;
}

std::string refobj_csv(std::span<const StratumRow> rows) {
    std::string out(kRefObjCsvHeader);
    out += '\n';
    for (const auto& row : rows) {
        const auto& s = row.summary;
        std::vector<MetricSummary> one{s};
        auto line = metrics_csv(one);
        line = line.substr(line.find('\n') + 1);
        line.pop_back();
        out += std::string(to_string(row.key)) + ',' + line + ',' + (s.not_generalizable ? "true" : "false") + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr const char* kFont = "DejaVu Sans, Arial, sans-serif";
constexpr const char* kCloseUpColor = "#1f77b4";
constexpr const char* kDistantColor = "#ff7f0e";
constexpr const char* kUnannotatedColor = "#9e9e9e";

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    auto s = fmt::format("{:.2f}", v);
    return s == "-0.00" ? "0.00" : s;
}

class Svg {
public:
    Svg(int width, int height, const ChartLabel& label, std::string_view title) : width_(width), height_(height) {
        body_ = fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
                            "viewBox=\"0 0 {0} {1}\" font-family=\"{2}\" data-run-id=\"{3}\" data-policy=\"{4}\">\n",
                            width, height, kFont, xml_escape(label.run_id), to_string(label.policy));
        body_ += "<title>" + xml_escape(title) + "</title>\n";
        body_ += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", width, height);
        text(width / 2.0, 24, title, "middle", 15, "font-weight=\"bold\"");
        text(width - 8.0, height - 8.0,
             fmt::format("run {} | scoring {}", label.run_id, to_string(label.policy)), "end", 10,
             "fill=\"#555555\" class=\"run-label\"");
    }

    void text(double x, double y, std::string_view s, std::string_view anchor = "start", int size = 12,
              std::string_view extra = {}) {
        body_ += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{}\"{}{}>{}</text>\n", num(x),
                             num(y), size, anchor, extra.empty() ? "" : " ", extra, xml_escape(s));
    }

    void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {}) {
        body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"{}{}/>\n", num(x), num(y),
                             num(w), num(h), fill, extra.empty() ? "" : " ", extra);
    }

    void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#000000",
              std::string_view extra = {}) {
        body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\"{}{}/>\n", num(x1), num(y1),
                             num(x2), num(y2), stroke, extra.empty() ? "" : " ", extra);
    }

    void raw(std::string s) { body_ += std::move(s); }

    std::string finish() && {
        body_ += "</svg>\n";
        return std::move(body_);
    }

    int width() const { return width_; }
    int height() const { return height_; }

private:
    int width_, height_;
    std::string body_;
};

// Upper axis bound: a round number at or above `v`.
double nice_ceiling(double v) {
    if (v <= 0.0)
        return 1.0;
    double mag = std::pow(10.0, std::floor(std::log10(v)));
    for (double step : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (step * mag >= v)
            return step * mag;
    return 10.0 * mag;
}

struct Plot {
    double left, top, width, height;
    double y_max;

    double y(double v) const { return top + height - v / y_max * height; }
    double bottom() const { return top + height; }
};

void y_axis(Svg& svg, const Plot& p, int ticks, std::string_view label, bool integer_ticks) {
    svg.line(p.left, p.top, p.left, p.bottom());
    svg.line(p.left, p.bottom(), p.left + p.width, p.bottom());
    for (int i = 0; i <= ticks; ++i) {
        double v = p.y_max * i / ticks;
        double y = p.y(v);
        svg.line(p.left - 4, y, p.left, y);
        if (i > 0)
            svg.line(p.left, y, p.left + p.width, y, "#e0e0e0");
        svg.text(p.left - 7, y + 4, integer_ticks ? fmt::format("{}", std::lround(v)) : fmt::format("{:g}", v), "end",
                 11);
    }
    svg.text(16, p.top + p.height / 2, label, "middle", 12,
             fmt::format("transform=\"rotate(-90 16 {})\"", num(p.top + p.height / 2)));
}

struct Series {
    const char* name;
    const char* color;
};

constexpr Series kDistanceSeries[] = {
    {"close-up", kCloseUpColor}, {"distant", kDistantColor}, {"unannotated", kUnannotatedColor}};

void legend(Svg& svg, double x, double y, std::span<const Series> series) {
    for (const auto& s : series) {
        svg.rect(x, y - 10, 12, 12, s.color);
        svg.text(x + 17, y, s.name, "start", 11);
        y += 18;
    }
}

} // namespace

std::string histogram_svg(const DatasetStats& stats, const ChartLabel& label) {
    Svg svg(760, 440, label, fmt::format("Ground-truth maximum diameter (n = {})", stats.n));
    if (stats.histogram.empty()) {
        svg.text(380, 220, "no samples", "middle");
        return std::move(svg).finish();
    }
    double lo = stats.histogram.begin()->first;
    double hi = stats.histogram.rbegin()->first;
    std::size_t bins = static_cast<std::size_t>(std::lround((hi - lo) * 2.0)) + 1;

    std::array<std::size_t, 3> series_totals{};
    std::size_t tallest = 0;
    for (const auto& [edge, bin] : stats.histogram) {
        series_totals[0] += bin.close_up;
        series_totals[1] += bin.distant;
        series_totals[2] += bin.unannotated;
        tallest = std::max(tallest, bin.total());
    }

    Plot p{64, 48, 760 - 64 - 150, 440 - 48 - 70, nice_ceiling(static_cast<double>(tallest))};
    y_axis(svg, p, 5, "samples", true);
    double slot = p.width / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        double edge = lo + 0.5 * static_cast<double>(i);
        double x = p.left + slot * static_cast<double>(i);
        auto it = stats.histogram.find(edge);
        HistogramBin bin = it == stats.histogram.end() ? HistogramBin{} : it->second;
        svg.raw(fmt::format("<g class=\"bin\" data-edge=\"{}\" data-total=\"{}\">\n", num(edge), bin.total()));
        double base = 0.0;
        std::array<std::size_t, 3> parts{bin.close_up, bin.distant, bin.unannotated};
        for (std::size_t k = 0; k < 3; ++k) {
            if (parts[k] == 0)
                continue;
            double top = base + static_cast<double>(parts[k]);
            svg.rect(x + 1, p.y(top), slot - 2, p.y(base) - p.y(top), kDistanceSeries[k].color,
                     fmt::format("class=\"{}\"", kDistanceSeries[k].name));
            base = top;
        }
        svg.raw("</g>\n");
        if (i % 2 == 0)
            svg.text(x + slot / 2, p.bottom() + 16, fmt::format("{:g}", edge), "middle", 10);
    }
    svg.text(p.left + p.width / 2, p.bottom() + 40, "maximum diameter (cm), 0.5 cm bins", "middle", 12);

    std::vector<Series> present;
    for (std::size_t k = 0; k < 3; ++k)
        if (series_totals[k] > 0)
            present.push_back(kDistanceSeries[k]);
    legend(svg, p.left + p.width + 20, p.top + 12, present);
    return std::move(svg).finish();
}

std::string miss_chart_svg(std::span<const MissBar> bars, const ChartLabel& label) {
    int width = std::max(480, 90 + 150 + 70 * static_cast<int>(bars.size()));
    Svg svg(width, 420, label, "Misses per model and prompt");
    std::size_t tallest = 0;
    std::array<std::size_t, 3> series_totals{};
    for (const auto& b : bars) {
        tallest = std::max(tallest, b.total());
        series_totals[0] += b.close_up;
        series_totals[1] += b.distant;
        series_totals[2] += b.unannotated;
    }
    Plot p{64, 48, static_cast<double>(width - 64 - 150), 420 - 48 - 70,
           nice_ceiling(static_cast<double>(std::max<std::size_t>(tallest, 1)))};
    y_axis(svg, p, 5, "misses", true);
    double slot = bars.empty() ? p.width : p.width / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& b = bars[i];
        double x = p.left + slot * static_cast<double>(i);
        double bar_w = std::min(slot * 0.7, 48.0);
        double bx = x + (slot - bar_w) / 2;
        svg.raw(fmt::format("<g class=\"bar\" data-model=\"{}\" data-strategy=\"{}\" data-total=\"{}\">\n",
                            xml_escape(b.model_id), to_string(b.strategy), b.total()));
        double base = 0.0;
        std::array<std::size_t, 3> parts{b.close_up, b.distant, b.unannotated};
        for (std::size_t k = 0; k < 3; ++k) {
            double top = base + static_cast<double>(parts[k]);
            svg.rect(bx, p.y(top), bar_w, p.y(base) - p.y(top), kDistanceSeries[k].color,
                     fmt::format("class=\"{}\" data-count=\"{}\"", kDistanceSeries[k].name, parts[k]));
            base = top;
        }
        svg.text(x + slot / 2, p.y(base) - 5, std::to_string(b.total()), "middle", 11);
        svg.raw("</g>\n");
        svg.text(x + slot / 2, p.bottom() + 16, b.model_id, "middle", 11);
        svg.text(x + slot / 2, p.bottom() + 30, std::string(to_string(b.strategy)), "middle", 11);
    }
    std::vector<Series> present;
    for (std::size_t k = 0; k < 3; ++k)
        if (series_totals[k] > 0 || k < 2)
            present.push_back(kDistanceSeries[k]);
    legend(svg, p.left + p.width + 20, p.top + 12, present);
    return std::move(svg).finish();
}

std::vector<ScatterPoint> scatter_points(const RunAnalysis& a, const std::string& model_id, Strategy strategy) {
    std::vector<ScatterPoint> points;
    bool known = false;
    for (const auto& m : a.measurements) {
        if (m.model_id != model_id || m.strategy != strategy)
            continue;
        known = true;
        if (m.miss_reason == MissReason::provider_failure)
            continue;
        double truth = a.truths.at(m.sample_id);
        if (m.miss) {
            if (a.policy == ScoringPolicy::paper_zero)
                points.push_back({m.sample_id, truth, 0.0, true});
            continue;
        }
        double pred = a.source == ValueSource::rounded ? *m.value_cm_rounded : *m.value_cm_raw;
        points.push_back({m.sample_id, truth, pred, false});
    }
    if (!known)
        throw Error("no measurements for " + model_id + " " + std::string(to_string(strategy)));
    if (points.empty())
        throw Error("nothing to plot for " + model_id + " " + std::string(to_string(strategy)));
    std::sort(points.begin(), points.end(),
              [](const ScatterPoint& x, const ScatterPoint& y) { return x.sample_id < y.sample_id; });
    return points;
}

std::string scatter_svg(const RunAnalysis& a, const std::string& model_id, Strategy strategy) {
    auto points = scatter_points(a, model_id, strategy);
    ChartLabel label{a.run_id, a.policy};
    Svg svg(560, 600, label, fmt::format("{} {}: predicted vs. ground truth", model_id, to_string(strategy)));

    double extent = 1.0;
    for (const auto& pt : points)
        extent = std::max({extent, pt.truth, pt.pred});
    extent = std::ceil(extent);

    const double left = 64, top = 48, side = 440;
    auto sx = [&](double v) { return left + v / extent * side; };
    auto sy = [&](double v) { return top + side - v / extent * side; };

    svg.line(left, top, left, top + side);
    svg.line(left, top + side, left + side, top + side);
    int step = extent > 20 ? 5 : (extent > 10 ? 2 : 1);
    for (int v = 0; v <= static_cast<int>(extent); v += step) {
        svg.line(sx(v), top + side, sx(v), top + side + 4);
        svg.text(sx(v), top + side + 17, std::to_string(v), "middle", 10);
        svg.line(left - 4, sy(v), left, sy(v));
        svg.text(left - 7, sy(v) + 4, std::to_string(v), "end", 10);
    }
    svg.text(left + side / 2, top + side + 38, "ground truth (cm)", "middle", 12);
    svg.text(16, top + side / 2, "prediction (cm)", "middle", 12,
             fmt::format("transform=\"rotate(-90 16 {})\"", num(top + side / 2)));
    svg.line(sx(0), sy(0), sx(extent), sy(extent), "#444444",
             "stroke-dasharray=\"6 4\" class=\"identity\"");

    std::size_t misses = 0;
    for (const auto& pt : points) {
        double x = sx(pt.truth), y = sy(pt.pred);
        if (pt.miss) {
            ++misses;
            svg.raw(fmt::format("<path class=\"miss\" data-sample=\"{}\" d=\"M{} {} L{} {} M{} {} L{} {}\" "
                                "stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
                                xml_escape(pt.sample_id), num(x - 4), num(y - 4), num(x + 4), num(y + 4), num(x - 4),
                                num(y + 4), num(x + 4), num(y - 4)));
        } else {
            svg.raw(fmt::format("<circle class=\"hit\" data-sample=\"{}\" cx=\"{}\" cy=\"{}\" r=\"3.5\" "
                                "fill=\"{}\" fill-opacity=\"0.6\"/>\n",
                                xml_escape(pt.sample_id), num(x), num(y), kCloseUpColor));
        }
    }

    double ly = top + side + 62;
    svg.rect(left, ly - 9, 10, 10, kCloseUpColor);
    svg.text(left + 15, ly, "prediction", "start", 11);
    svg.line(left + 100, ly - 4, left + 130, ly - 4, "#444444", "stroke-dasharray=\"6 4\"");
    svg.text(left + 135, ly, "perfect agreement", "start", 11);
    if (misses > 0 || a.policy == ScoringPolicy::paper_zero) {
        svg.raw(fmt::format("<path d=\"M{} {} L{} {} M{} {} L{} {}\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
                            num(left + 260), num(ly - 8), num(left + 268), num(ly), num(left + 260), num(ly),
                            num(left + 268), num(ly - 8)));
        svg.text(left + 273, ly, fmt::format("miss scored as 0 cm ({})", misses), "start", 11);
    }
    return std::move(svg).finish();
}

std::string reference_bar_svg(std::span<const StratumRow> rows, const std::string& title, const ChartLabel& label) {
    int width = std::max(480, 64 + 40 + 90 * static_cast<int>(rows.size()));
    Svg svg(width, 440, label, title);
    double tallest = 0.0;
    bool footnote = false;
    for (const auto& r : rows) {
        tallest = std::max(tallest, r.summary.mae_cm);
        footnote = footnote || r.summary.not_generalizable;
    }
    Plot p{64, 48, static_cast<double>(width - 64 - 40), 440 - 48 - 90, nice_ceiling(std::max(tallest, 0.5))};
    y_axis(svg, p, 5, "MAE (cm)", false);
    double slot = rows.empty() ? p.width : p.width / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = rows[i].summary;
        double x = p.left + slot * static_cast<double>(i);
        double bar_w = std::min(slot * 0.7, 56.0);
        svg.raw(fmt::format("<g class=\"bar\" data-stratum=\"{}\" data-mae=\"{}\" data-n=\"{}\">\n",
                            xml_escape(s.stratum), format_double(s.mae_cm), s.n));
        svg.rect(x + (slot - bar_w) / 2, p.y(s.mae_cm), bar_w, p.bottom() - p.y(s.mae_cm), kCloseUpColor);
        svg.text(x + slot / 2, p.y(s.mae_cm) - 5, num(s.mae_cm) + (s.not_generalizable ? "*" : ""), "middle", 11);
        svg.raw("</g>\n");
        svg.text(x + slot / 2, p.bottom() + 16, s.stratum, "middle", 10);
        svg.text(x + slot / 2, p.bottom() + 30, fmt::format("n = {}", s.n), "middle", 10);
    }
    if (footnote)
        svg.text(p.left, p.bottom() + 56, "* single sample; result not generalizable", "start", 11,
                 "class=\"footnote\"");
    return std::move(svg).finish();
}

std::pair<std::vector<StratumRow>, std::string> reference_bar_rows(const RunAnalysis& a) {
    if (a.overall.empty())
        return {{}, "MAE by reference object"};
    const MetricSummary* group = &a.overall.front();
    for (const auto& r : a.overall) {
        if (r.strategy == Strategy::P2) {
            group = &r;
            break;
        }
    }
    bool manual = std::any_of(a.references.begin(), a.references.end(), [&](const StratumRow& r) {
        return r.key == StratifyKey::reference_manual && r.summary.model_id == group->model_id &&
               r.summary.strategy == group->strategy;
    });
    auto key = manual ? StratifyKey::reference_manual : StratifyKey::reference_model_step1;
    std::vector<StratumRow> rows;
    for (const auto& r : a.references)
        if (r.key == key && r.summary.model_id == group->model_id && r.summary.strategy == group->strategy)
            rows.push_back(r);
    return {rows, fmt::format("{} {} MAE by reference object ({})", group->model_id, to_string(group->strategy),
                              manual ? "manual annotation" : "step-1 class")};
}

namespace {

std::string file_token(std::string_view s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

std::string scatter_file_name(const std::string& model, Strategy s) {
    return "fig_scatter_" + file_token(model) + "_" + std::string(to_string(s)) + ".svg";
}

void strata_section(std::string& md, const RunAnalysis& a, const std::vector<StratumRow>& rows, StratifyKey key,
                    const std::string& heading) {
    std::map<std::pair<std::string, Strategy>, std::vector<MetricSummary>> groups;
    for (const auto& r : rows)
        if (r.key == key)
            groups[{r.summary.model_id, r.summary.strategy}].push_back(r.summary);
    if (groups.empty())
        return;
    md += "## " + heading + "\n\n";
    for (const auto& overall : a.overall) {
        auto it = groups.find({overall.model_id, overall.strategy});
        if (it == groups.end())
            continue;
        md += "### " + overall.model_id + " " + std::string(to_string(overall.strategy)) + "\n\n";
        md += format_metrics_table(it->second, true) + "\n";
    }
}

} // namespace

std::string report_markdown(const RunAnalysis& a) {
    std::string md = "# Run " + a.run_id + "\n\n";
    md += "- config hash: `" + a.config_hash + "`\n";
    md += "- scoring policy: " + std::string(to_string(a.policy)) +
          (a.policy == ScoringPolicy::paper_zero ? " (a miss counts as a 0 cm prediction)\n"
                                                 : " (misses left out of the error statistics)\n");
    md += "- prediction values: " + std::string(to_string(a.source)) + "\n";
    md += "- provider failures: excluded from n\n";
    md += fmt::format("- cells: {} ({} failed){}\n\n", a.cells, a.failed_cells,
                      a.interrupted ? ", run incomplete" : "");

    md += "## Overall metrics\n\nRows sorted by MAE; bold marks the best value per column.\n\n";
    md += format_metrics_table(a.overall) + "\n";
    if (!a.overall.empty()) {
        md += "## Scatter plots\n\n";
        for (const auto& r : a.overall)
            md += "- ![" + r.model_id + " " + std::string(to_string(r.strategy)) + "](" +
                  scatter_file_name(r.model_id, r.strategy) + ")\n";
        md += "\n";
    }

    md += "## Misses by distance class\n\n![misses](fig_miss.svg)\n\n";
    md += "| Model | Prompt | close-up | distant | unannotated | total |\n|---|---|---:|---:|---:|---:|\n";
    for (const auto& b : a.misses)
        md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", b.model_id, to_string(b.strategy), b.close_up, b.distant,
                          b.unannotated, b.total());
    md += "\n";

    strata_section(md, a, a.references, StratifyKey::reference_manual, "Reference-object strata (manual annotation)");
    strata_section(md, a, a.references, StratifyKey::reference_model_step1,
                   "Reference-object strata (model step-1 class)");
    if (!a.references.empty())
        md += "![MAE by reference object](fig_refbar.svg)\n\n";
    strata_section(md, a, a.distances, StratifyKey::distance, "Distance strata");

    if (a.dataset) {
        const auto& d = *a.dataset;
        md += "## Dataset\n\n![ground-truth histogram](fig_hist.svg)\n\n";
        md += "| n | mean (cm) | std (cm) | min | q1 | q3 | max | close-up fraction |\n";
        md += "|---:|---:|---:|---:|---:|---:|---:|---:|\n";
        md += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} |\n\n", d.n, format_double(d.mean_cm),
                          format_double(d.std_cm), format_double(d.min_cm), format_double(d.q1_cm),
                          format_double(d.q3_cm), format_double(d.max_cm), format_double(d.close_up_fraction));
    }
    return md;
}

namespace {

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& content) {
    auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out << content;
    return path;
}

} // namespace

ReportBundle write_report(const RunAnalysis& a, const fs::path& out_root) {
    ReportBundle bundle;
    bundle.dir = out_root / a.run_id;
    fs::create_directories(bundle.dir);
    ChartLabel label{a.run_id, a.policy};

    bundle.files.push_back(write_file(bundle.dir, "metrics.csv", metrics_csv(a.overall)));
    bundle.files.push_back(write_file(bundle.dir, "refobj.csv", refobj_csv(a.references)));
    if (a.dataset)
        bundle.files.push_back(write_file(bundle.dir, "fig_hist.svg", histogram_svg(*a.dataset, label)));
    bundle.files.push_back(write_file(bundle.dir, "fig_miss.svg", miss_chart_svg(a.misses, label)));
    for (const auto& r : a.overall) {
        try {
            bundle.files.push_back(write_file(bundle.dir, scatter_file_name(r.model_id, r.strategy),
                                              scatter_svg(a, r.model_id, r.strategy)));
        } catch (const Error& e) {
            spdlog::warn("scatter skipped: {}", e.what());
        }
    }
    auto [ref_rows, ref_title] = reference_bar_rows(a);
    if (!ref_rows.empty())
        bundle.files.push_back(write_file(bundle.dir, "fig_refbar.svg", reference_bar_svg(ref_rows, ref_title, label)));
    bundle.files.push_back(write_file(bundle.dir, "report.md", report_markdown(a)));
    return bundle;
}

} // namespace hailgauge
