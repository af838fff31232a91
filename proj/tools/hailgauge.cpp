// hailgauge command line: ingest, fetch, annotate, run, report, serve, export-rerun.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hailgauge/annotations.hpp"
#include "hailgauge/dataset.hpp"
#include "hailgauge/orchestrator.hpp"
#include "hailgauge/reporting.hpp"
#include "hailgauge/review_server.hpp"

namespace fs = std::filesystem;
using namespace hailgauge;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) {
    g_stop = true;
}

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

std::set<std::string> sample_ids(const std::vector<Sample>& samples) {
    std::set<std::string> ids;
    for (const auto& s : samples)
        ids.insert(s.sample_id);
    return ids;
}

void print_counts(const AnnotationCounts& c) {
    for (const auto& [cls, n] : c.by_reference)
        fmt::print("reference {:<24} {}\n", to_string(cls), n);
    for (auto cls : kDistanceClasses)
        fmt::print("distance  {:<24} {}\n", to_string(cls), c.by_distance.contains(cls) ? c.by_distance.at(cls) : 0);
    fmt::print("unannotated {}\n", c.unannotated);
}

void print_stats(const DatasetStats& s) {
    nlohmann::ordered_json j;
    j["n"] = s.n;
    j["mean_cm"] = s.mean_cm;
    j["std_cm"] = s.std_cm;
    j["min_cm"] = s.min_cm;
    j["q1_cm"] = s.q1_cm;
    j["q3_cm"] = s.q3_cm;
    j["max_cm"] = s.max_cm;
    j["close_up_fraction"] = s.close_up_fraction;
    std::cout << j.dump(2) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hailgauge: hailstone size estimation with multimodal models"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Build the canonical sample list from an event CSV");
    fs::path events_csv, image_dir, samples_out;
    ingest->add_option("--events", events_csv, "Event CSV")->required();
    ingest->add_option("--images", image_dir, "Image root directory")->required();
    ingest->add_option("--out", samples_out, "Output samples JSONL")->required();

    // fetch
    auto* fetch = app.add_subcommand("fetch", "Download remote images referenced by an event CSV");
    fetch->add_option("--events", events_csv, "Event CSV")->required();
    fetch->add_option("--images", image_dir, "Destination directory")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "Ground-truth statistics of a sample list");
    fs::path samples_path, annotations_path;
    stats->add_option("--samples", samples_path, "Samples JSONL")->required();
    stats->add_option("--annotations", annotations_path, "Annotation log");

    // annotate
    auto* annotate = app.add_subcommand("annotate", "Set, count, import or export manual annotations");
    std::string sample_id, reference, distance, annotator = "cli", raw_object;
    fs::path export_path, import_path;
    bool show_counts = false;
    annotate->add_option("--store", annotations_path, "Annotation log (JSONL)")->required();
    annotate->add_option("--dataset", samples_path, "Samples JSONL")->required();
    annotate->add_option("--set", sample_id, "Sample to annotate");
    annotate->add_option("--reference", reference, "Reference class token");
    annotate->add_option("--distance", distance, "close_up | distant");
    annotate->add_option("--annotator", annotator, "Annotator name");
    annotate->add_option("--raw-object", raw_object, "Free-text object note");
    annotate->add_option("--export", export_path, "Write the current view to a file");
    annotate->add_option("--import", import_path, "Upsert every record of a file");
    annotate->add_flag("--counts", show_counts, "Print per-class counts");

    // validate / run
    auto* validate = app.add_subcommand("validate", "Check a run config without dispatching");
    fs::path config_path, only_path;
    validate->add_option("--config", config_path, "Run config (INI)")->required();
    auto* run_cmd = app.add_subcommand("run", "Run the model x strategy x sample grid");
    std::string run_id;
    run_cmd->add_option("--config", config_path, "Run config (INI)")->required();
    run_cmd->add_option("--only", only_path, "Rerun list restricting the samples");
    run_cmd->add_option("--run-id", run_id, "Override the run id");

    // report
    auto* report = app.add_subcommand("report", "Write tables and charts for a run");
    fs::path run_dir, report_root = "report";
    std::string scoring;
    report->add_option("--run", run_dir, "Run directory")->required();
    report->add_option("--out", report_root, "Report root (default: report)");
    report->add_option("--annotations", annotations_path, "Annotation log (default: from the run)");
    report->add_option("--scoring", scoring, "paper_zero | exclude_misses (default: from the run)");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the review API and UI");
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path static_root;
    double threshold = 2.0;
    serve->add_option("--run", run_dir, "Run directory")->required();
    serve->add_option("--port", port, "Port (default 8080)");
    serve->add_option("--host", host, "Bind address (default 127.0.0.1)");
    serve->add_option("--dataset", samples_path, "Samples JSONL (default: from the run)");
    serve->add_option("--annotations", annotations_path, "Annotation log (default: from the run)");
    serve->add_option("--static", static_root, "UI bundle directory");
    serve->add_option("--outlier-threshold", threshold, "Outlier |error| threshold in cm");

    // export-rerun
    auto* rerun = app.add_subcommand("export-rerun", "Write flagged samples as a rerun list");
    fs::path rerun_out;
    rerun->add_option("--run", run_dir, "Run directory")->required();
    rerun->add_option("--out", rerun_out, "Output file")->required();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("hailgauge"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*ingest) {
            auto table = load_events(events_csv);
            for (const auto& r : table.rejects)
                spdlog::warn("row {}: {}", r.row, r.reason);
            auto set = build_samples(table.events, image_dir);
            write_samples_jsonl(samples_out, set.samples);
            fmt::print("events {} rejected rows {} dropped events {} samples {} excluded images {}\n",
                       table.events.size(), table.rejects.size(), set.dropped_events, set.samples.size(),
                       set.excluded.size());
            return kExitOk;
        }
        if (*fetch) {
            auto table = load_events(events_csv);
            auto r = fetch_images(table.events, image_dir);
            fmt::print("downloaded {} already present {} failed {}\n", r.downloaded, r.already_present,
                       r.failures.size());
            for (const auto& f : r.failures)
                spdlog::warn("{}", f);
            return r.failures.empty() ? kExitOk : kExitPartial;
        }
        if (*stats) {
            auto samples = read_samples_jsonl(samples_path);
            auto view = annotations_path.empty() ? AnnotationView{} : load_annotation_view(annotations_path);
            print_stats(compute_stats(samples, [&](const std::string& id) -> std::optional<DistanceClass> {
                auto it = view.find(id);
                return it == view.end() ? std::nullopt : std::optional(it->second.distance);
            }));
            return kExitOk;
        }
        if (*annotate) {
            auto samples = read_samples_jsonl(samples_path);
            AnnotationStore store(annotations_path, sample_ids(samples));
            if (!import_path.empty())
                store.import_from(import_path);
            if (!sample_id.empty()) {
                auto ref = parse_reference_class(reference);
                auto dist = parse_distance_class(distance);
                if (!ref || !dist) {
                    spdlog::error("--set needs a valid --reference and --distance");
                    return kExitFailure;
                }
                Annotation a{sample_id, *ref, *dist, annotator, utc_now(), std::nullopt};
                if (!raw_object.empty())
                    a.raw_object = raw_object;
                store.upsert(a);
            }
            if (!export_path.empty())
                store.export_current(export_path);
            if (show_counts)
                print_counts(store.counts());
            return kExitOk;
        }
        if (*validate) {
            auto cfg = load_run_config(config_path);
            auto findings = validate_config(cfg);
            for (const auto& f : findings)
                fmt::print("{}: {}\n", f.severity == Finding::Severity::error ? "error" : "warning", f.message);
            return has_errors(findings) ? kExitConfig : kExitOk;
        }
        if (*run_cmd) {
            RunConfig cfg;
            try {
                cfg = load_run_config(config_path);
            } catch (const ConfigError& e) {
                spdlog::error("{}", e.what());
                return kExitConfig;
            }
            if (!only_path.empty())
                cfg.only = fs::absolute(only_path);
            if (!run_id.empty())
                cfg.run_id = run_id;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            RunHooks hooks;
            hooks.stop = &g_stop;
            RunRecord record;
            try {
                record = hailgauge::run(cfg, hooks);
            } catch (const ConfigError& e) {
                spdlog::error("{}", e.what());
                return kExitConfig;
            }
            fmt::print("run {}: {} of {} cells, {} failed -> {}\n", record.run_id, record.cells.size(),
                       record.expected_cells, record.failed_cells, record.run_dir.string());
            return (record.failed_cells > 0 || record.interrupted) ? kExitPartial : kExitOk;
        }
        if (*report) {
            auto record = load_run(run_dir);
            auto ann_path = annotations_path.empty() ? record.annotations_path : annotations_path;
            auto view = load_annotation_view(ann_path);
            std::optional<ScoringPolicy> policy;
            if (!scoring.empty()) {
                policy = parse_scoring_policy(scoring);
                if (!policy) {
                    spdlog::error("unknown scoring policy '{}'", scoring);
                    return kExitConfig;
                }
            }
            auto bundle = write_report(analyze_run(record, view, policy), report_root);
            for (const auto& f : bundle.files)
                fmt::print("{}\n", f.string());
            return kExitOk;
        }
        if (*serve) {
            ReviewOptions options;
            options.outlier_threshold_cm = threshold;
            if (!static_root.empty())
                options.static_root = static_root;
            std::shared_ptr<ReviewService> service = ReviewService::open(
                run_dir, samples_path.empty() ? std::nullopt : std::optional(samples_path),
                annotations_path.empty() ? std::nullopt : std::optional(annotations_path), options);
            ReviewServer server(service);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            int bound = server.start(host, port);
            fmt::print("serving {} on http://{}:{}/\n", service->run().run_id, host, bound);
            std::fflush(stdout);
            while (!g_stop)
                std::this_thread::sleep_for(std::chrono::milliseconds(200));
            server.stop();
            return kExitOk;
        }
        if (*rerun) {
            auto service = ReviewService::open(run_dir, std::nullopt, std::nullopt);
            service->export_rerun_list(rerun_out);
            fmt::print("{} flagged samples -> {}\n", service->flagged().size(), rerun_out.string());
            return kExitOk;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
    return kExitOk;
}
