#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hailgauge/annotations.hpp"
#include "hailgauge/dataset.hpp"
#include "hailgauge/orchestrator.hpp"

namespace hailgauge {

struct ReviewOptions {
    double outlier_threshold_cm = 2.0;
    std::optional<std::filesystem::path> static_root;
    std::string annotator = "reviewer";
};

struct SampleQuery {
    std::size_t limit = 50;
    std::size_t offset = 0;
    std::optional<ReferenceClass> reference;
    std::optional<DistanceClass> distance;
    bool outliers_only = false;
};

/// 404-style failure (unknown sample).
class NotFound : public Error {
public:
    using Error::Error;
};

/// Request handling behind the HTTP API, usable without a socket.
///
/// The run log is read once; annotations are live. Flags persist to <run_dir>/flags.jsonl.
class ReviewService {
public:
    ReviewService(RunRecord run, std::vector<Sample> samples, std::shared_ptr<AnnotationStore> store,
                  ReviewOptions options = {});

    /// Dataset and annotation paths default to the ones recorded in the run header.
    static std::unique_ptr<ReviewService> open(const std::filesystem::path& run_dir,
                                               std::optional<std::filesystem::path> dataset,
                                               std::optional<std::filesystem::path> annotations,
                                               ReviewOptions options = {});

    nlohmann::json list_samples(const SampleQuery& q) const;
    nlohmann::json sample(const std::string& sample_id) const; // throws NotFound
    std::filesystem::path image_path(const std::string& sample_id) const;

    /// Body: {"reference": ..., "distance": ..., "annotator"?: ..., "raw_object"?: ...}.
    /// Throws NotFound for unknown samples and Error for invalid bodies.
    nlohmann::json put_annotation(const std::string& sample_id, const nlohmann::json& body);

    /// Sets the flag (default) or clears it with {"flagged": false}.
    nlohmann::json set_flag(const std::string& sample_id, const nlohmann::json& body);
    std::vector<std::string> flagged() const;
    void export_rerun_list(const std::filesystem::path& path) const;

    nlohmann::json metrics() const;
    nlohmann::json runs() const;

    const ReviewOptions& options() const { return options_; }
    const RunRecord& run() const { return run_; }
    std::filesystem::path flags_path() const { return run_.run_dir / "flags.jsonl"; }

private:
    struct Prediction {
        std::string model_id;
        Strategy strategy;
        Measurement measurement;
        std::optional<double> pred;     // value entering the statistics
        std::optional<double> residual; // pred - truth, identical to the metrics error
        std::optional<std::string> step1_class;
    };

    nlohmann::json item_json(const Sample& s, const AnnotationView& view) const;
    bool is_outlier(const std::string& sample_id) const;

    RunRecord run_;
    std::vector<Sample> samples_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, std::vector<Prediction>> predictions_;
    std::vector<MetricSummary> overall_;
    std::shared_ptr<AnnotationStore> store_;
    ReviewOptions options_;

    mutable std::mutex flags_mutex_;
    std::set<std::string> flags_;
};

/// Minimal page served at "/" when no static UI bundle is installed.
std::string fallback_index_html();

/// HTTP front end over a ReviewService. Binds loopback by default.
class ReviewServer {
public:
    explicit ReviewServer(std::shared_ptr<ReviewService> service);
    ~ReviewServer();

    /// Binds and starts serving on a background thread. Port 0 picks a free port.
    /// Throws Error when the address cannot be bound.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks on the calling thread until stop().
    void serve_forever(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

} // namespace hailgauge
