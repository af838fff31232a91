#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hailgauge/gateway.hpp"
#include "hailgauge/metrics.hpp"
#include "hailgauge/parser.hpp"
#include "hailgauge/prompts.hpp"

namespace hailgauge {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct Finding {
    enum class Severity { warning, error };
    Severity severity = Severity::error;
    std::string message;
};

/// Everything needed to run a (model x strategy x sample) grid.
struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path annotations;
    std::vector<ModelEndpoint> endpoints;
    std::vector<Strategy> strategies;
    ScoringPolicy scoring = ScoringPolicy::paper_zero;
    ValueSource value_source = ValueSource::rounded;
    ParserOptions parser;
    std::size_t max_concurrency = 1;
    std::filesystem::path output_dir = "runs";
    std::filesystem::path cache_dir = "cache";
    std::string run_id;
    std::optional<std::filesystem::path> prompts_dir;
    std::map<std::string, std::string> reference_dimensions; // class token -> typical dimensions text
    std::optional<std::filesystem::path> only;               // rerun list restricting the samples

    // Problems found while reading the file (unknown tokens and the like); surfaced by validate_config.
    std::vector<Finding> load_findings;

    std::filesystem::path run_dir() const { return output_dir / run_id; }
};

/// Reads an INI-style config with [dataset], [endpoints.<name>], [run] and optional [references]
/// sections. Relative paths resolve against the config file's directory.
/// Throws ConfigError when the file cannot be read or parsed.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir);

using EnvLookup = std::function<const char*(const char*)>;

std::vector<Finding> validate_config(const RunConfig& config, const EnvLookup& env = nullptr);
bool has_errors(std::span<const Finding> findings);

PromptEngine make_prompt_engine(const RunConfig& config);

/// Deterministic snapshot of the config (no secrets) and its hash.
nlohmann::ordered_json config_snapshot(const RunConfig& config);
std::string config_hash(const RunConfig& config);

struct CellRecord {
    std::string model_id;
    Strategy strategy = Strategy::P1;
    std::string sample_id;
    double truth_cm = 0.0;
    StrategyTrace trace;
    Measurement measurement;
    std::int64_t latency_ms = 0;

    bool failed() const { return trace.step2_status != OutcomeStatus::ok; }
};

struct RunRecord {
    std::string run_id;
    std::string config_hash;
    nlohmann::json config;
    std::filesystem::path run_dir;
    std::filesystem::path dataset_path;
    std::filesystem::path annotations_path;
    ScoringPolicy scoring = ScoringPolicy::paper_zero;
    ValueSource value_source = ValueSource::rounded;
    std::vector<CellRecord> cells; // sorted by (model, strategy, sample_id)
    std::size_t expected_cells = 0;
    std::size_t failed_cells = 0;
    bool interrupted = false;

    std::vector<Measurement> measurements() const;
    TruthMap truths() const;
};

struct RunHooks {
    // Overrides backend construction (tests inject shared mocks to count calls).
    std::function<std::shared_ptr<Backend>(const ModelEndpoint&)> backend_factory;
    // Checked before each cell is dispatched; set to stop early (SIGINT).
    const std::atomic<bool>* stop = nullptr;
    // Stop dispatching once this many cells have completed (simulates a killed run).
    std::optional<std::size_t> stop_after_cells;
};

/// Runs every grid cell once, appending each finished cell to <output_dir>/<run_id>/run.jsonl as
/// it completes. Per-cell failures are recorded, never fatal. Throws ConfigError before any
/// dispatch when validate_config reports errors.
RunRecord run(const RunConfig& config, const RunHooks& hooks = {});

inline constexpr const char* kRunLogName = "run.jsonl";

/// Reads a run log. A truncated final line (killed run) is ignored.
RunRecord load_run(const std::filesystem::path& run_dir);

/// Rerun lists: JSON Lines of {"sample_id": ...}; lines starting with '#' are comments.
void write_rerun_list(const std::filesystem::path& path, std::span<const std::string> sample_ids);
std::vector<std::string> read_rerun_list(const std::filesystem::path& path);

} // namespace hailgauge
