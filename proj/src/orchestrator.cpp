#include "hailgauge/orchestrator.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/spdlog.h>

#include "hailgauge/dataset.hpp"
#include "hailgauge/digest.hpp"

namespace hailgauge {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        auto b = item.find_first_not_of(" \t");
        auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos)
            out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
    fs::path p(value);
    return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::optional<bool> parse_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1" || s == "on")
        return true;
    if (s == "false" || s == "no" || s == "0" || s == "off")
        return false;
    return std::nullopt;
}

class SectionReader {
public:
    SectionReader(const pt::ptree& tree, std::string name, std::vector<Finding>& findings)
        : tree_(tree), name_(std::move(name)), findings_(findings) {}

    std::optional<std::string> str(const std::string& key) const {
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '/'));
        return v ? std::optional<std::string>(*v) : std::nullopt;
    }

    template <typename T>
    std::optional<T> number(const std::string& key) const {
        auto s = str(key);
        if (!s)
            return std::nullopt;
        try {
            std::size_t used = 0;
            T v;
            if constexpr (std::is_floating_point_v<T>)
                v = static_cast<T>(std::stod(*s, &used));
            else
                v = static_cast<T>(std::stoll(*s, &used));
            if (used != s->size())
                throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            findings_.push_back({Finding::Severity::error, "[" + name_ + "] " + key + ": not a number: '" + *s + "'"});
            return std::nullopt;
        }
    }

    std::optional<bool> flag(const std::string& key) const {
        auto s = str(key);
        if (!s)
            return std::nullopt;
        auto b = parse_bool(*s);
        if (!b)
            findings_.push_back({Finding::Severity::error, "[" + name_ + "] " + key + ": not a boolean: '" + *s + "'"});
        return b;
    }

private:
    const pt::ptree& tree_;
    std::string name_;
    std::vector<Finding>& findings_;
};

} // namespace

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    RunConfig cfg;
    auto& findings = cfg.load_findings;
    static const std::set<std::string> kKnownSections = {"dataset", "run", "references"};

    bool saw_dataset = false, saw_run = false;
    for (const auto& [name, section] : tree) {
        if (name == "dataset") {
            saw_dataset = true;
            SectionReader r(section, name, findings);
            if (auto v = r.str("samples"))
                cfg.dataset = resolve(base_dir, *v);
            else
                findings.push_back({Finding::Severity::error, "[dataset] samples is required"});
            if (auto v = r.str("annotations"))
                cfg.annotations = resolve(base_dir, *v);
            else
                findings.push_back({Finding::Severity::error, "[dataset] annotations is required"});
        } else if (name == "run") {
            saw_run = true;
            SectionReader r(section, name, findings);
            cfg.run_id = r.str("run_id").value_or("");
            for (const auto& token : split_list(r.str("strategies").value_or("P1,P2"))) {
                if (auto s = parse_strategy(token))
                    cfg.strategies.push_back(*s);
                else
                    findings.push_back({Finding::Severity::error, "unknown strategy token '" + token + "'"});
            }
            if (auto v = r.str("scoring")) {
                if (auto p = parse_scoring_policy(*v))
                    cfg.scoring = *p;
                else
                    findings.push_back({Finding::Severity::error, "unknown scoring policy '" + *v + "'"});
            }
            if (auto v = r.str("value_source")) {
                if (auto p = parse_value_source(*v))
                    cfg.value_source = *p;
                else
                    findings.push_back({Finding::Severity::error, "unknown value_source '" + *v + "'"});
            }
            if (auto v = r.number<long long>("max_concurrency")) {
                if (*v < 1)
                    findings.push_back({Finding::Severity::error, "max_concurrency must be >= 1"});
                else
                    cfg.max_concurrency = static_cast<std::size_t>(*v);
            }
            if (auto v = r.str("output_dir"))
                cfg.output_dir = resolve(base_dir, *v);
            else
                cfg.output_dir = resolve(base_dir, "runs");
            if (auto v = r.str("cache_dir"))
                cfg.cache_dir = resolve(base_dir, *v);
            else
                cfg.cache_dir = resolve(base_dir, "cache");
            if (auto v = r.str("prompts_dir"))
                cfg.prompts_dir = resolve(base_dir, *v);
            if (auto v = r.str("only"))
                cfg.only = resolve(base_dir, *v);
            if (auto v = r.flag("range_gate"))
                cfg.parser.range_gate = *v;
            if (auto v = r.flag("convert_mm"))
                cfg.parser.convert_mm = *v;
            if (auto v = r.number<double>("max_cm"))
                cfg.parser.max_cm = *v;
        } else if (name == "references") {
            for (const auto& [key, value] : section)
                cfg.reference_dimensions[key] = value.get_value<std::string>();
        } else if (name.starts_with("endpoints.")) {
            SectionReader r(section, name, findings);
            ModelEndpoint ep;
            ep.model_id = r.str("model_id").value_or(name.substr(std::string("endpoints.").size()));
            ep.provider_model = r.str("provider_model").value_or("");
            ep.base_url = r.str("base_url").value_or("");
            auto adapter = r.str("adapter").value_or("openai");
            if (auto a = parse_adapter(adapter))
                ep.adapter = *a;
            else
                findings.push_back({Finding::Severity::error, "[" + name + "] unknown adapter '" + adapter + "'"});
            ep.auth_env_var = r.str("auth_env_var").value_or("");
            if (auto v = r.number<long long>("max_output_tokens"))
                ep.max_output_tokens = static_cast<int>(*v);
            if (auto v = r.number<double>("temperature"))
                ep.temperature = *v;
            if (auto v = r.number<long long>("request_timeout"))
                ep.request_timeout = std::chrono::seconds(*v);
            if (auto v = r.number<long long>("max_retries"))
                ep.max_retries = static_cast<int>(*v);
            if (auto v = r.number<long long>("retry_base_delay_ms"))
                ep.retry_base_delay = std::chrono::milliseconds(*v);
            ep.rate_limit_per_sec = ep.adapter == Adapter::mock ? 0.0 : 1.0;
            if (auto v = r.number<double>("rate_limit_per_sec"))
                ep.rate_limit_per_sec = *v;
            if (auto v = r.str("mock_script"))
                ep.mock_script = resolve(base_dir, *v);
            cfg.endpoints.push_back(std::move(ep));
        } else {
            findings.push_back({Finding::Severity::warning, "unknown config section [" + name + "] ignored"});
        }
    }
    if (!saw_dataset)
        findings.push_back({Finding::Severity::error, "missing [dataset] section"});
    if (!saw_run) {
        cfg.strategies = {Strategy::P1, Strategy::P2};
        cfg.output_dir = resolve(base_dir, "runs");
        cfg.cache_dir = resolve(base_dir, "cache");
    }
    if (cfg.run_id.empty())
        cfg.run_id = "run-" + config_hash(cfg).substr(0, 12);
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    return parse_run_config(in, fs::absolute(path).parent_path());
}

bool has_errors(std::span<const Finding> findings) {
    return std::any_of(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.severity == Finding::Severity::error; });
}

std::vector<Finding> validate_config(const RunConfig& cfg, const EnvLookup& env) {
    std::vector<Finding> out = cfg.load_findings;
    auto error = [&](std::string msg) { out.push_back({Finding::Severity::error, std::move(msg)}); };
    auto getenv_fn = env ? env : EnvLookup([](const char* name) { return std::getenv(name); });

    if (cfg.dataset.empty() || !fs::is_regular_file(cfg.dataset))
        error("dataset file not found: " + cfg.dataset.string());
    if (cfg.annotations.empty() || !fs::is_regular_file(cfg.annotations))
        error("annotations file not found: " + cfg.annotations.string());
    if (cfg.endpoints.empty())
        error("no endpoints configured");
    if (cfg.strategies.empty())
        error("no strategies configured");
    if (cfg.max_concurrency < 1)
        error("max_concurrency must be >= 1");
    if (cfg.run_id.empty() || cfg.run_id.find_first_of("/\\") != std::string::npos || cfg.run_id == "." ||
        cfg.run_id == "..")
        error("invalid run_id '" + cfg.run_id + "'");
    if (cfg.parser.max_cm <= 0.0)
        error("max_cm must be positive");

    std::set<std::string> ids;
    for (const auto& ep : cfg.endpoints) {
        if (ep.model_id.empty() || ep.model_id.find_first_of("/\\") != std::string::npos)
            error("invalid model_id '" + ep.model_id + "'");
        if (!ids.insert(ep.model_id).second)
            error("duplicate model_id '" + ep.model_id + "'");
        if (ep.max_output_tokens < 1)
            error(ep.model_id + ": max_output_tokens must be >= 1");
        if (ep.temperature < 0.0)
            error(ep.model_id + ": temperature must be >= 0");
        if (ep.max_retries < 0)
            error(ep.model_id + ": max_retries must be >= 0");
        if (ep.adapter == Adapter::mock) {
            if (ep.mock_script && !fs::is_regular_file(*ep.mock_script))
                error(ep.model_id + ": mock script not found: " + ep.mock_script->string());
            continue;
        }
        if (ep.base_url.empty())
            error(ep.model_id + ": base_url is required for live endpoints");
        if (ep.auth_env_var.empty())
            error(ep.model_id + ": auth_env_var is required for live endpoints");
        else if (const char* v = getenv_fn(ep.auth_env_var.c_str()); !v || !*v)
            error(ep.model_id + ": environment variable " + ep.auth_env_var + " is not set");
        if (ep.rate_limit_per_sec <= 0.0)
            out.push_back({Finding::Severity::warning, ep.model_id + ": rate limiting disabled for a live endpoint"});
    }

    if (cfg.prompts_dir) {
        try {
            PromptSet::load(*cfg.prompts_dir);
        } catch (const Error& e) {
            error(e.what());
        }
    }
    auto catalog = ReferenceCatalog::defaults();
    for (const auto& [token, text] : cfg.reference_dimensions) {
        try {
            catalog.set_dimensions(token, text);
        } catch (const Error& e) {
            error(std::string("[references] ") + e.what());
        }
    }
    if (cfg.only && !fs::is_regular_file(*cfg.only))
        error("rerun list not found: " + cfg.only->string());
    return out;
}

PromptEngine make_prompt_engine(const RunConfig& cfg) {
    auto prompts = cfg.prompts_dir ? PromptSet::load(*cfg.prompts_dir) : PromptSet::defaults();
    auto catalog = ReferenceCatalog::defaults();
    for (const auto& [token, text] : cfg.reference_dimensions)
        catalog.set_dimensions(token, text);
    return PromptEngine(std::move(prompts), std::move(catalog));
}

nlohmann::ordered_json config_snapshot(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["dataset"] = cfg.dataset.generic_string();
    j["annotations"] = cfg.annotations.generic_string();
    auto eps = nlohmann::ordered_json::array();
    for (const auto& ep : cfg.endpoints) {
        nlohmann::ordered_json e;
        e["model_id"] = ep.model_id;
        e["provider_model"] = ep.wire_model();
        e["adapter"] = std::string(to_string(ep.adapter));
        e["base_url"] = ep.base_url;
        e["auth_env_var"] = ep.auth_env_var;
        e["max_output_tokens"] = ep.max_output_tokens;
        e["temperature"] = ep.temperature;
        e["max_retries"] = ep.max_retries;
        eps.push_back(std::move(e));
    }
    j["endpoints"] = std::move(eps);
    auto strategies = nlohmann::ordered_json::array();
    for (auto s : cfg.strategies)
        strategies.push_back(std::string(to_string(s)));
    j["strategies"] = std::move(strategies);
    j["scoring"] = std::string(to_string(cfg.scoring));
    j["value_source"] = std::string(to_string(cfg.value_source));
    j["parser"] = {{"convert_mm", cfg.parser.convert_mm},
                   {"range_gate", cfg.parser.range_gate},
                   {"max_cm", cfg.parser.max_cm}};
    j["max_concurrency"] = cfg.max_concurrency;
    j["only"] = cfg.only ? cfg.only->generic_string() : std::string{};
    nlohmann::ordered_json dims = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.reference_dimensions)
        dims[k] = v;
    j["reference_dimensions"] = std::move(dims);
    try {
        auto prompts = cfg.prompts_dir ? PromptSet::load(*cfg.prompts_dir) : PromptSet::defaults();
        nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
        for (const auto& [k, v] : prompts.hashes())
            hashes[k] = v;
        j["prompt_hashes"] = std::move(hashes);
    } catch (const Error&) {
        j["prompt_hashes"] = nullptr;
    }
    return j;
}

std::string config_hash(const RunConfig& cfg) {
    return sha256_hex(config_snapshot(cfg).dump());
}

std::vector<Measurement> RunRecord::measurements() const {
    std::vector<Measurement> out;
    out.reserve(cells.size());
    for (const auto& c : cells)
        out.push_back(c.measurement);
    return out;
}

TruthMap RunRecord::truths() const {
    TruthMap t;
    for (const auto& c : cells)
        t[c.sample_id] = c.truth_cm;
    return t;
}

namespace {

nlohmann::ordered_json cell_to_json(const CellRecord& c) {
    nlohmann::ordered_json j;
    j["type"] = "cell";
    j["model"] = c.model_id;
    j["strategy"] = std::string(to_string(c.strategy));
    j["sample_id"] = c.sample_id;
    j["truth_cm"] = c.truth_cm;
    j["trace"] = trace_to_json(c.trace);
    j["measurement"] = measurement_to_json(c.measurement);
    j["timing"] = {{"latency_ms", c.latency_ms}, {"finished_at", format_utc(utc_now())}};
    return j;
}

CellRecord cell_from_json(const nlohmann::json& j) {
    CellRecord c;
    c.model_id = j.at("model").get<std::string>();
    auto s = parse_strategy(j.at("strategy").get<std::string>());
    if (!s)
        throw Error("run log: bad strategy");
    c.strategy = *s;
    c.sample_id = j.at("sample_id").get<std::string>();
    c.truth_cm = j.at("truth_cm").get<double>();
    c.trace = trace_from_json(j.at("trace"));
    c.measurement = measurement_from_json(j.at("measurement"));
    if (j.contains("timing"))
        c.latency_ms = j.at("timing").value("latency_ms", std::int64_t{0});
    return c;
}

void sort_cells(std::vector<CellRecord>& cells) {
    std::sort(cells.begin(), cells.end(), [](const CellRecord& a, const CellRecord& b) {
        return std::tie(a.model_id, a.strategy, a.sample_id) < std::tie(b.model_id, b.strategy, b.sample_id);
    });
}

class RunLogWriter {
public:
    explicit RunLogWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_)
            throw Error("cannot write run log " + path.string());
    }

    void write(const nlohmann::ordered_json& line) {
        std::lock_guard lock(mutex_);
        out_ << line.dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
};

} // namespace

RunRecord run(const RunConfig& cfg, const RunHooks& hooks) {
    auto findings = validate_config(cfg);
    for (const auto& f : findings)
        if (f.severity == Finding::Severity::warning)
            spdlog::warn("config: {}", f.message);
    if (has_errors(findings)) {
        std::string msg = "invalid run config:";
        for (const auto& f : findings)
            if (f.severity == Finding::Severity::error)
                msg += "\n  - " + f.message;
        throw ConfigError(msg);
    }

    auto samples = read_samples_jsonl(cfg.dataset);
    if (cfg.only) {
        auto ids = read_rerun_list(*cfg.only);
        std::set<std::string> keep(ids.begin(), ids.end());
        std::erase_if(samples, [&](const Sample& s) { return !keep.contains(s.sample_id); });
    }
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });

    const auto engine = make_prompt_engine(cfg);
    auto cache = std::make_shared<OutcomeCache>(cfg.cache_dir);

    std::vector<std::unique_ptr<Gateway>> gateways;
    for (const auto& ep : cfg.endpoints) {
        auto backend = hooks.backend_factory ? hooks.backend_factory(ep) : make_backend(ep);
        gateways.push_back(std::make_unique<Gateway>(ep, std::move(backend), cache));
    }

    // Each image is normalized once and shared by every model and strategy.
    std::unordered_map<std::string, std::shared_ptr<const ImagePayload>> images;
    std::unordered_map<std::string, std::string> image_errors;
    for (const auto& s : samples) {
        try {
            images[s.sample_id] = load_normalized_image(s.image_path);
        } catch (const Error& e) {
            spdlog::warn("sample {}: {}", s.sample_id, e.what());
            image_errors[s.sample_id] = e.what();
        }
    }

    struct GridCell {
        std::size_t gateway;
        Strategy strategy;
        const Sample* sample;
    };
    std::vector<GridCell> grid;
    for (std::size_t g = 0; g < gateways.size(); ++g)
        for (auto strategy : cfg.strategies)
            for (const auto& s : samples)
                grid.push_back({g, strategy, &s});

    RunRecord record;
    record.run_id = cfg.run_id;
    record.config_hash = config_hash(cfg);
    record.config = config_snapshot(cfg);
    record.run_dir = cfg.run_dir();
    record.dataset_path = cfg.dataset;
    record.annotations_path = cfg.annotations;
    record.scoring = cfg.scoring;
    record.value_source = cfg.value_source;
    record.expected_cells = grid.size();

    fs::create_directories(record.run_dir);
    RunLogWriter log(record.run_dir / kRunLogName);
    {
        nlohmann::ordered_json header;
        header["type"] = "header";
        header["run_id"] = record.run_id;
        header["config_hash"] = record.config_hash;
        header["config"] = record.config;
        header["grid_size"] = grid.size();
        header["timing"] = {{"started_at", format_utc(utc_now())}};
        log.write(header);
    }

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> completed{0};
    std::atomic<bool> halted{false};
    std::mutex cells_mutex;
    std::vector<CellRecord> cells;
    cells.reserve(grid.size());

    auto should_stop = [&] { return halted.load() || (hooks.stop && hooks.stop->load()); };

    auto worker = [&] {
        while (!should_stop()) {
            std::size_t idx = next.fetch_add(1);
            if (idx >= grid.size())
                return;
            const auto& cell = grid[idx];
            auto& gateway = *gateways[cell.gateway];
            const auto& sample = *cell.sample;

            CellRecord rec;
            rec.model_id = gateway.endpoint().model_id;
            rec.strategy = cell.strategy;
            rec.sample_id = sample.sample_id;
            rec.truth_cm = sample.truth_diameter_cm;
            if (auto it = images.find(sample.sample_id); it != images.end()) {
                ExecutionTiming timing;
                rec.trace = execute_strategy(sample.sample_id, it->second, cell.strategy, gateway, engine, &timing);
                rec.latency_ms = timing.latency_ms;
            } else {
                rec.trace = execute_strategy(sample.sample_id, sample.image_path, cell.strategy, gateway, engine);
            }
            rec.measurement = to_measurement(rec.trace, rec.model_id, cfg.parser);
            log.write(cell_to_json(rec));
            {
                std::lock_guard lock(cells_mutex);
                cells.push_back(std::move(rec));
            }
            auto done = completed.fetch_add(1) + 1;
            if (hooks.stop_after_cells && done >= *hooks.stop_after_cells)
                halted = true;
        }
    };

    std::size_t workers = std::min<std::size_t>(cfg.max_concurrency, std::max<std::size_t>(grid.size(), 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < workers; ++i)
            pool.emplace_back(worker);
    }

    sort_cells(cells);
    record.cells = std::move(cells);
    record.interrupted = record.cells.size() < grid.size();
    record.failed_cells = static_cast<std::size_t>(
        std::count_if(record.cells.begin(), record.cells.end(), [](const CellRecord& c) { return c.failed(); }));

    nlohmann::ordered_json footer;
    footer["type"] = "footer";
    footer["cells"] = record.cells.size();
    footer["failed_cells"] = record.failed_cells;
    footer["interrupted"] = record.interrupted;
    log.write(footer);
    return record;
}

RunRecord load_run(const fs::path& run_dir) {
    auto path = run_dir / kRunLogName;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("no run log at " + path.string());

    RunRecord record;
    record.run_dir = run_dir;
    std::map<std::tuple<std::string, Strategy, std::string>, CellRecord> cells;
    bool saw_header = false, saw_footer = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (in.peek() == std::char_traits<char>::eof()) {
                spdlog::warn("run log {}: ignoring truncated final line", path.string());
                break;
            }
            throw Error("run log " + path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
        }
        try {
            auto type = j.value("type", std::string{});
            if (type == "header") {
                saw_header = true;
                record.run_id = j.at("run_id").get<std::string>();
                record.config_hash = j.at("config_hash").get<std::string>();
                record.config = j.at("config");
                record.expected_cells = j.value("grid_size", std::size_t{0});
                record.dataset_path = record.config.at("dataset").get<std::string>();
                record.annotations_path = record.config.at("annotations").get<std::string>();
                if (auto p = parse_scoring_policy(record.config.value("scoring", std::string("paper_zero"))))
                    record.scoring = *p;
                if (auto v = parse_value_source(record.config.value("value_source", std::string("rounded"))))
                    record.value_source = *v;
            } else if (type == "cell") {
                auto c = cell_from_json(j);
                cells[{c.model_id, c.strategy, c.sample_id}] = std::move(c);
            } else if (type == "footer") {
                saw_footer = true;
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error("run log " + path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!saw_header)
        throw Error("run log " + path.string() + " has no header line");
    for (auto& [key, c] : cells)
        record.cells.push_back(std::move(c));
    sort_cells(record.cells);
    record.failed_cells = static_cast<std::size_t>(
        std::count_if(record.cells.begin(), record.cells.end(), [](const CellRecord& c) { return c.failed(); }));
    record.interrupted = !saw_footer || record.cells.size() < record.expected_cells;
    return record;
}

void write_rerun_list(const fs::path& path, std::span<const std::string> sample_ids) {
    std::set<std::string> unique(sample_ids.begin(), sample_ids.end());
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out << "# hailgauge rerun list: one {\"sample_id\": ...} object per line\n";
    for (const auto& id : unique)
        out << nlohmann::json{{"sample_id", id}}.dump() << '\n';
}

std::vector<std::string> read_rerun_list(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open rerun list " + path.string());
    std::vector<std::string> ids;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.starts_with("#"))
            continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("sample_id"))
            throw Error("rerun list " + path.string() + ": malformed line");
        auto id = j.at("sample_id").get<std::string>();
        if (seen.insert(id).second)
            ids.push_back(std::move(id));
    }
    return ids;
}

} // namespace hailgauge
